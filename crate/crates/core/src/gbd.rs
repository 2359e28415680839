//! Benders-style decomposition over schedules: per-schedule primal solves
//! produce affine cuts, and the master problem picks the next schedule.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::convex::FeasibilityOracle;
use crate::error::{Error, Result};
use crate::freq_alloc::SlotMatrix;
use crate::master::{eval_cut, solve_master, AffineCut, CutKind, CutLedger, MasterMode};
use crate::scenario::{Scenario, Schedule, TimeAllocation};
use crate::time_alloc::{solve_primal, PrimalOptions, PrimalOutcome, PrimalSolution};

/// Result of evaluating one schedule. An infeasible schedule may come
/// without a slack certificate, in which case a no-good cut is used.
#[derive(Debug, Clone)]
pub enum Evaluation {
    Feasible(Box<PrimalSolution>),
    Infeasible(Option<Box<FeasibilityOracle>>),
}

impl From<PrimalOutcome> for Evaluation {
    fn from(o: PrimalOutcome) -> Self {
        match o {
            PrimalOutcome::Feasible(s) => Evaluation::Feasible(s),
            PrimalOutcome::Infeasible(f) => Evaluation::Infeasible(Some(f)),
        }
    }
}

/// Fixed-schedule subproblem solver driven by [`run`].
pub trait PrimalSolver: Sync {
    fn evaluate(&self, scn: &Scenario, schedule: &Schedule) -> Result<Evaluation>;
}

/// Unrestricted joint time and computation allocation.
#[derive(Debug, Clone, Default)]
pub struct JointPrimal {
    pub options: PrimalOptions,
}

impl JointPrimal {
    /// Joint interior-point solve without the alternating loop.
    pub fn oracle() -> Self {
        Self {
            options: PrimalOptions {
                oracle_only: true,
                ..Default::default()
            },
        }
    }

    /// Alternating frequency/time updates, certified against the oracle.
    pub fn alternating() -> Self {
        Self::default()
    }
}

impl PrimalSolver for JointPrimal {
    fn evaluate(&self, scn: &Scenario, schedule: &Schedule) -> Result<Evaluation> {
        solve_primal(scn, schedule, &self.options).map(Evaluation::from)
    }
}

/// Shared affine form: `constant + Σ_n coeff[k][n−1]` with
/// `coeff[k][n−1] = ρ_k (λ A_k^3 / (h_k Δt_n^2) − h_k η P0 Σ_{i<n} Δt_i) − β_k Σ_m x_{n,m}`
/// and the source-schedule multipliers transferred to devices.
#[allow(clippy::too_many_arguments)]
fn affine_cut(
    scn: &Scenario,
    schedule: &Schedule,
    dt: &TimeAllocation,
    x: &SlotMatrix,
    rho: &[f64],
    beta: &[f64],
    base: f64,
    kind: CutKind,
    source_iteration: usize,
) -> AffineCut {
    let k = scn.num_devices();
    let hp = scn.params.harvest_power();
    let mut constant = base;
    for n in 1..=k {
        constant += beta[n - 1] * scn.tasks[schedule.device_at(n)].cycles;
    }
    let offloaded: Vec<f64> = (1..=k).map(|n| x.row_sum(n)).collect();
    let mut coeff = vec![vec![0.0; k]; k];
    for (dev, row) in coeff.iter_mut().enumerate() {
        let src = schedule.slot_of(dev) - 1;
        let task = &scn.tasks[dev];
        let (r, b) = (rho[src], beta[src]);
        for n in 1..=k {
            let mut c = -b * offloaded[n - 1];
            if r != 0.0 {
                c += r * (task.tx_requirement(&scn.params) / (dt[n] * dt[n]) - task.channel_gain * hp * dt.prefix(n));
            }
            row[n - 1] = c;
        }
    }
    AffineCut {
        kind,
        constant,
        coeff,
        source_iteration,
    }
}

/// Optimality cut from a feasible primal solution; at the source schedule
/// it evaluates to the primal energy.
pub fn build_optimality_cut(scn: &Scenario, schedule: &Schedule, sol: &PrimalSolution, iteration: usize) -> AffineCut {
    affine_cut(
        scn,
        schedule,
        &sol.dt,
        &sol.x,
        &sol.duals.rho,
        &sol.duals.beta,
        sol.energy,
        CutKind::Optimality,
        iteration,
    )
}

/// Feasibility cut from the slack problem; at the source schedule it
/// evaluates to the (positive) normalized slack.
pub fn build_feasibility_cut(scn: &Scenario, schedule: &Schedule, feas: &FeasibilityOracle, iteration: usize) -> AffineCut {
    affine_cut(
        scn,
        schedule,
        &feas.dt,
        &feas.x,
        &feas.rho_hat,
        &feas.beta_hat,
        0.0,
        CutKind::Feasibility,
        iteration,
    )
}

/// Cut that is positive only at `schedule` itself.
pub fn no_good_cut(schedule: &Schedule, iteration: usize) -> AffineCut {
    let k = schedule.len();
    let mut coeff = vec![vec![0.0; k]; k];
    for (slot, &dev) in schedule.order().iter().enumerate() {
        coeff[dev][slot] = 1.0;
    }
    AffineCut {
        kind: CutKind::Feasibility,
        constant: -(k as f64 - 1.0),
        coeff,
        source_iteration: iteration,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdOptions {
    /// Relative gap `(ub − lb) ≤ eps_gbd · |ub|`.
    pub eps_gbd: f64,
    pub max_iter: usize,
    pub master: MasterMode,
    /// Feasibility cuts must exceed this at their source schedule.
    pub cut_tol: f64,
    /// Relative slack allowed before an optimality cut counts as
    /// overestimating a later primal energy.
    pub weak_duality_tol: f64,
    pub initial: Option<Schedule>,
}

impl Default for GbdOptions {
    fn default() -> Self {
        Self {
            eps_gbd: 1e-4,
            max_iter: 200,
            master: MasterMode::BranchAndBound,
            cut_tol: 1e-9,
            weak_duality_tol: 1e-6,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GbdStatus {
    Converged,
    /// The master proposed an already visited schedule.
    Stalled,
    /// Every schedule other than those visited is cut off.
    Exhausted,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub schedule: Schedule,
    pub cut: CutKind,
    pub energy: Option<f64>,
    pub ub: f64,
    pub lb: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Optimality cuts that exceeded a later primal energy.
    pub weak_duality_violations: usize,
    pub max_violation_rel: f64,
    /// Some master value exceeded the incumbent energy.
    pub bounds_crossed: bool,
    pub no_good_cuts: usize,
    pub infeasible_visits: usize,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub schedule: Schedule,
    pub solution: PrimalSolution,
    pub energy: f64,
    pub ub: f64,
    pub lb: f64,
    pub iterations: usize,
    pub status: GbdStatus,
    pub trace: Vec<TraceRow>,
    pub diagnostics: Diagnostics,
    pub ledger: CutLedger,
}

impl SolveReport {
    pub fn gap(&self) -> f64 {
        self.ub - self.lb
    }

    /// Bounds never moved the wrong way between iterations.
    pub fn bounds_monotone(&self) -> bool {
        self.trace
            .windows(2)
            .all(|w| w[1].ub <= w[0].ub && w[1].lb >= w[0].lb)
    }
}

/// Runs the decomposition from the identity schedule (or `opts.initial`).
pub fn run(scn: &Scenario, primal: &dyn PrimalSolver, opts: &GbdOptions) -> Result<SolveReport> {
    scn.validate()?;
    let k = scn.num_devices();
    let mut schedule = match &opts.initial {
        Some(s) if s.len() == k => s.clone(),
        Some(s) => return Err(Error::Domain(format!("initial schedule {s} does not cover {k} devices"))),
        None => Schedule::identity(k),
    };
    let mut ledger = CutLedger::new();
    let mut visited: HashSet<Schedule> = HashSet::new();
    let mut incumbent: Option<(Schedule, PrimalSolution)> = None;
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut trace = Vec::new();
    let mut diag = Diagnostics::default();
    let mut status = GbdStatus::IterationLimit;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        visited.insert(schedule.clone());
        let (cut, energy) = match primal.evaluate(scn, &schedule)? {
            Evaluation::Feasible(sol) => {
                let e = sol.energy;
                for c in ledger.optimality() {
                    let v = eval_cut(c, &schedule);
                    let excess = (v - e) / e.abs().max(f64::MIN_POSITIVE);
                    if excess > opts.weak_duality_tol {
                        diag.weak_duality_violations += 1;
                        diag.max_violation_rel = diag.max_violation_rel.max(excess);
                    }
                }
                let cut = build_optimality_cut(scn, &schedule, &sol, iterations);
                if e < ub {
                    ub = e;
                    incumbent = Some((schedule.clone(), *sol));
                }
                (cut, Some(e))
            }
            Evaluation::Infeasible(cert) => {
                diag.infeasible_visits += 1;
                let cut = cert
                    .map(|f| build_feasibility_cut(scn, &schedule, &f, iterations))
                    .filter(|c| eval_cut(c, &schedule) > opts.cut_tol)
                    .unwrap_or_else(|| {
                        diag.no_good_cuts += 1;
                        no_good_cut(&schedule, iterations)
                    });
                (cut, None)
            }
        };
        let kind = cut.kind;
        ledger.push(cut);
        let master = match solve_master(&ledger, k, opts.master, opts.cut_tol) {
            Ok(m) => m,
            Err(Error::AllSchedulesInfeasible) if incumbent.is_some() => {
                trace.push(TraceRow {
                    iteration: iterations,
                    schedule: schedule.clone(),
                    cut: kind,
                    energy,
                    ub,
                    lb,
                    psi: f64::NAN,
                });
                status = GbdStatus::Exhausted;
                break;
            }
            Err(e) => return Err(e),
        };
        lb = lb.max(master.psi);
        if lb > ub {
            diag.bounds_crossed = true;
        }
        trace.push(TraceRow {
            iteration: iterations,
            schedule: schedule.clone(),
            cut: kind,
            energy,
            ub,
            lb,
            psi: master.psi,
        });
        if ub.is_finite() && ub - lb <= opts.eps_gbd * ub.abs() {
            status = GbdStatus::Converged;
            break;
        }
        if visited.contains(&master.schedule) {
            status = GbdStatus::Stalled;
            break;
        }
        schedule = master.schedule;
    }

    let Some((schedule, solution)) = incumbent else {
        return Err(Error::IterationLimit {
            iterations,
            gap: f64::INFINITY,
        });
    };
    Ok(SolveReport {
        schedule,
        energy: solution.energy,
        solution,
        ub,
        lb,
        iterations,
        status,
        trace,
        diagnostics: diag,
        ledger,
    })
}
