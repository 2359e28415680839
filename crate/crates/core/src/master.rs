//! Master problem over permutation schedules: minimize the largest
//! optimality cut subject to every feasibility cut being non-positive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::Schedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CutKind {
    Optimality,
    Feasibility,
}

/// `constant + Σ_n coeff[π_n][n−1]` where `π_n` is the device in slot `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineCut {
    pub kind: CutKind,
    pub constant: f64,
    /// `coeff[k][n−1]`: contribution when device `k` offloads in slot `n`.
    pub coeff: Vec<Vec<f64>>,
    pub source_iteration: usize,
}

impl AffineCut {
    pub fn num_devices(&self) -> usize {
        self.coeff.len()
    }
}

/// Evaluates a cut at a schedule, summing slots in order.
pub fn eval_cut(cut: &AffineCut, schedule: &Schedule) -> f64 {
    let mut v = cut.constant;
    for (slot, &k) in schedule.order().iter().enumerate() {
        v += cut.coeff[k][slot];
    }
    v
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CutLedger {
    cuts: Vec<AffineCut>,
}

impl CutLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, cut: AffineCut) {
        self.cuts.push(cut);
    }

    pub fn cuts(&self) -> &[AffineCut] {
        &self.cuts
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn optimality(&self) -> impl Iterator<Item = &AffineCut> {
        self.cuts.iter().filter(|c| c.kind == CutKind::Optimality)
    }

    pub fn feasibility(&self) -> impl Iterator<Item = &AffineCut> {
        self.cuts.iter().filter(|c| c.kind == CutKind::Feasibility)
    }

    /// Largest optimality cut at `schedule`, or 0 J with no optimality cuts.
    pub fn lower_bound_at(&self, schedule: &Schedule) -> f64 {
        self.optimality()
            .map(|c| eval_cut(c, schedule))
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
            .unwrap_or(0.0)
    }

    pub fn admits(&self, schedule: &Schedule, tol: f64) -> bool {
        self.feasibility().all(|c| eval_cut(c, schedule) <= tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MasterMode {
    Enumeration,
    BranchAndBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterSolution {
    pub schedule: Schedule,
    pub psi: f64,
    pub nodes_explored: u64,
    pub method: MasterMode,
}

/// Largest K accepted by enumeration mode.
pub const ENUMERATION_CAP: usize = 10;

/// Exact master solve. Ties go to the lexicographically smallest schedule.
pub fn solve_master(ledger: &CutLedger, k: usize, mode: MasterMode, tol: f64) -> Result<MasterSolution> {
    if k == 0 {
        return Err(Error::Domain("K must be positive".into()));
    }
    if let Some(c) = ledger.cuts().iter().find(|c| c.coeff.len() != k || c.coeff.iter().any(|r| r.len() != k)) {
        return Err(Error::Domain(format!(
            "cut from iteration {} does not match K = {k}",
            c.source_iteration
        )));
    }
    match mode {
        MasterMode::Enumeration => enumerate(ledger, k, tol),
        MasterMode::BranchAndBound => branch_and_bound(ledger, k, tol),
    }
}

/// Advances `p` to the next permutation in lexicographic order.
pub fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

fn enumerate(ledger: &CutLedger, k: usize, tol: f64) -> Result<MasterSolution> {
    if k > ENUMERATION_CAP {
        return Err(Error::Refused(format!(
            "enumeration over {k}! schedules exceeds the cap K <= {ENUMERATION_CAP}; use branch and bound"
        )));
    }
    let mut p: Vec<usize> = (0..k).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut nodes = 0u64;
    loop {
        nodes += 1;
        let s = Schedule::new(p.clone())?;
        if ledger.admits(&s, tol) {
            let psi = ledger.lower_bound_at(&s);
            if best.as_ref().is_none_or(|(b, _)| psi < *b) {
                best = Some((psi, p.clone()));
            }
        }
        if !next_permutation(&mut p) {
            break;
        }
    }
    let (psi, order) = best.ok_or(Error::AllSchedulesInfeasible)?;
    Ok(MasterSolution {
        schedule: Schedule::new(order)?,
        psi,
        nodes_explored: nodes,
        method: MasterMode::Enumeration,
    })
}

struct Search<'a> {
    k: usize,
    opt: Vec<&'a AffineCut>,
    feas: Vec<&'a AffineCut>,
    tol: f64,
    order: Vec<usize>,
    used: Vec<bool>,
    /// Running `constant + Σ assigned` per cut, in slot order.
    opt_partial: Vec<f64>,
    feas_partial: Vec<f64>,
    best: Option<(f64, Vec<usize>)>,
    nodes: u64,
}

impl Search<'_> {
    /// Lower bound on completions: assigned part plus, per open slot, the
    /// cheapest open device.
    fn completion_bound(&self, cut: &AffineCut, partial: f64) -> f64 {
        let depth = self.order.len();
        let mut v = partial;
        for slot in depth..self.k {
            let mut best = f64::INFINITY;
            for dev in 0..self.k {
                if !self.used[dev] {
                    best = best.min(cut.coeff[dev][slot]);
                }
            }
            v += best;
        }
        v
    }

    fn psi_bound(&self) -> f64 {
        if self.opt.is_empty() {
            return 0.0;
        }
        self.opt
            .iter()
            .zip(&self.opt_partial)
            .map(|(c, p)| self.completion_bound(c, *p))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn pruned_by_feasibility(&self) -> bool {
        self.feas
            .iter()
            .zip(&self.feas_partial)
            .any(|(c, p)| self.completion_bound(c, *p) > self.tol)
    }

    fn dfs(&mut self) {
        self.nodes += 1;
        let depth = self.order.len();
        if depth == self.k {
            let psi = if self.opt.is_empty() {
                0.0
            } else {
                self.opt_partial.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            };
            if self.feas_partial.iter().all(|v| *v <= self.tol)
                && self.best.as_ref().is_none_or(|(b, _)| psi < *b)
            {
                self.best = Some((psi, self.order.clone()));
            }
            return;
        }
        if self.pruned_by_feasibility() {
            return;
        }
        if let Some((b, _)) = &self.best {
            // Later leaves come lexicographically after the incumbent, so
            // ties cannot replace it.
            if self.psi_bound() >= *b {
                return;
            }
        }
        for dev in 0..self.k {
            if self.used[dev] {
                continue;
            }
            let saved_o = self.opt_partial.clone();
            let saved_f = self.feas_partial.clone();
            for (p, c) in self.opt_partial.iter_mut().zip(&self.opt) {
                *p += c.coeff[dev][depth];
            }
            for (p, c) in self.feas_partial.iter_mut().zip(&self.feas) {
                *p += c.coeff[dev][depth];
            }
            self.used[dev] = true;
            self.order.push(dev);
            self.dfs();
            self.order.pop();
            self.used[dev] = false;
            self.opt_partial = saved_o;
            self.feas_partial = saved_f;
        }
    }
}

fn branch_and_bound(ledger: &CutLedger, k: usize, tol: f64) -> Result<MasterSolution> {
    let opt: Vec<&AffineCut> = ledger.optimality().collect();
    let feas: Vec<&AffineCut> = ledger.feasibility().collect();
    let mut search = Search {
        k,
        opt_partial: opt.iter().map(|c| c.constant).collect(),
        feas_partial: feas.iter().map(|c| c.constant).collect(),
        opt,
        feas,
        tol,
        order: Vec::with_capacity(k),
        used: vec![false; k],
        best: None,
        nodes: 0,
    };
    search.dfs();
    let (psi, order) = search.best.ok_or(Error::AllSchedulesInfeasible)?;
    Ok(MasterSolution {
        schedule: Schedule::new(order)?,
        psi,
        nodes_explored: search.nodes,
        method: MasterMode::BranchAndBound,
    })
}
