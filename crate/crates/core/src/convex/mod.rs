//! Reference convex solves with multiplier recovery: the frequency problem
//! for a fixed time split, the joint time/computation problem for a fixed
//! schedule, its slack-minimizing feasibility variant, and the time-only
//! subproblem for fixed computation amounts.
//!
//! All problems are solved in scaled units (cycles over the largest task,
//! times over the deadline, energy over `κ F_s^3 / T^2`); inputs and outputs
//! are SI.

pub mod ipm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freq_alloc::{self, FreqDuals, FrequencyPlan, SlotMatrix};
use crate::scenario::{Scenario, Schedule, TimeAllocation};
pub use ipm::{kkt_residual, Constraint, IpmOptions, Problem, Term};

/// Raw solver output in scaled units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvexSolution {
    pub primal: Vec<f64>,
    pub objective: f64,
    pub duals: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct FreqOracle {
    pub plan: FrequencyPlan,
    pub duals: FreqDuals,
    pub energy: f64,
    pub solution: ConvexSolution,
}

/// Optimum of the joint problem with multipliers in SI units: `rho` per
/// order (J/J), `beta` per order (J/cycle), `omega` per slot (J/cycle),
/// `xi` (J/s).
#[derive(Debug, Clone)]
pub struct PrimalOracle {
    pub dt: TimeAllocation,
    pub x: SlotMatrix,
    pub energy: f64,
    pub rho: Vec<f64>,
    pub beta: Vec<f64>,
    pub omega: Vec<f64>,
    pub xi: f64,
    pub solution: ConvexSolution,
}

/// Slack-minimizing relaxation. `zeta` is in J and `iota` in cycles; the
/// objective is their sum normalized by `T h η P0` and the largest task.
#[derive(Debug, Clone)]
pub struct FeasibilityOracle {
    pub objective: f64,
    pub dt: TimeAllocation,
    pub x: SlotMatrix,
    pub zeta: Vec<f64>,
    pub iota: Vec<f64>,
    /// Multipliers of the relaxed causality rows, per J.
    pub rho_hat: Vec<f64>,
    /// Multipliers of the relaxed completion rows, per cycle.
    pub beta_hat: Vec<f64>,
    pub solution: ConvexSolution,
}

/// Time split for fixed computation amounts, with multipliers as in
/// [`PrimalOracle`].
#[derive(Debug, Clone)]
pub struct TimeOracle {
    pub dt: TimeAllocation,
    pub energy: f64,
    pub rho: Vec<f64>,
    pub omega: Vec<f64>,
    pub xi: f64,
    pub solution: ConvexSolution,
}

fn finish(prob: &Problem, r: ipm::IpmResult) -> ConvexSolution {
    ConvexSolution {
        kkt_residual: kkt_residual(prob, &r.z, &r.duals),
        primal: r.z,
        objective: r.objective,
        duals: r.duals,
        iterations: r.newton_steps,
    }
}

/// Frequency problem for fixed slot durations.
pub fn solve_freq_oracle(
    cycles: &[f64],
    dt: &TimeAllocation,
    f_max: f64,
    kappa: f64,
    opts: &IpmOptions,
) -> Result<FreqOracle> {
    let k = cycles.len();
    let required = freq_alloc::required_fmax(cycles, dt)?;
    if f_max < required {
        return Err(Error::Infeasible {
            reason: format!("capacity {f_max:.6e} below required {required:.6e}"),
            required: Some(required),
        });
    }
    let t_tot: f64 = dt.dt[2..].iter().sum();
    let mut index = vec![vec![usize::MAX; k + 2]; k + 1];
    let mut vars = Vec::new();
    for n in 1..=k {
        for m in n + 1..=k + 1 {
            if dt[m] > 0.0 {
                index[n][m] = vars.len();
                vars.push((n, m));
            }
        }
    }
    let nv = vars.len();
    let mut prob = Problem {
        num_vars: nv,
        ..Default::default()
    };
    for (j, &(_, m)) in vars.iter().enumerate() {
        prob.obj_terms.push(Term::PerspCube {
            w: dt[m] / t_tot,
            x: j,
            t: None,
            t_const: 1.0,
        });
    }
    let mut cap_rows = vec![usize::MAX; k + 2];
    for m in 2..=k + 1 {
        let lin: Vec<(usize, f64)> = (1..m)
            .filter(|&n| index[n][m] != usize::MAX)
            .map(|n| (index[n][m], 1.0))
            .collect();
        if !lin.is_empty() {
            cap_rows[m] = prob.constraints.len();
            prob.constraints.push(Constraint::linear(lin, 1.0));
        }
    }
    let mut done_rows = vec![usize::MAX; k + 1];
    for n in 1..=k {
        if cycles[n - 1] <= 0.0 {
            continue;
        }
        let lin: Vec<(usize, f64)> = (n + 1..=k + 1)
            .filter(|&m| index[n][m] != usize::MAX)
            .map(|m| (index[n][m], -dt[m] / t_tot))
            .collect();
        done_rows[n] = prob.constraints.len();
        prob.constraints
            .push(Constraint::linear(lin, -cycles[n - 1] / (f_max * t_tot)));
    }
    for j in 0..nv {
        prob.constraints.push(Constraint::nonneg(j));
    }
    let start = vec![0.5 / k as f64; nv];
    let r = ipm::solve(&prob, &start, opts)?;

    let e0 = kappa * f_max.powi(3) * t_tot;
    let mut plan = FrequencyPlan::zeros(k);
    for (j, &(n, m)) in vars.iter().enumerate() {
        plan.set(n, m, r.z[j] * f_max);
    }
    let mut duals = FreqDuals::zeros(k);
    for m in 2..=k + 1 {
        if cap_rows[m] != usize::MAX {
            duals.alpha[m] = r.duals[cap_rows[m]] * e0 / f_max;
        }
    }
    for n in 1..=k {
        if done_rows[n] != usize::MAX {
            duals.beta[n - 1] = r.duals[done_rows[n]] * e0 / (f_max * t_tot);
        }
    }
    let energy = r.objective * e0;
    Ok(FreqOracle {
        plan,
        duals,
        energy,
        solution: finish(&prob, r),
    })
}

/// Which computation amounts `x_{n,m}` are variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum XVars {
    None,
    All,
    /// Only `x_{n,K+1}`.
    LastSlot,
}

/// Scaling and index bookkeeping shared by the joint problems.
struct JointLayout {
    k: usize,
    fs: f64,
    t: f64,
    /// `λ A^3 / (h^2 η P0 T^3)` per order.
    demand: Vec<f64>,
    /// `h η P0 T` per order (J per unit scaled time).
    harvest: Vec<f64>,
    cycles: Vec<f64>,
    x_index: SlotMatrix,
    num_vars: usize,
}

impl JointLayout {
    fn new(scn: &Scenario, schedule: &Schedule, xvars: XVars) -> Result<Self> {
        scn.validate()?;
        let k = scn.num_devices();
        if schedule.len() != k {
            return Err(Error::Domain(format!(
                "schedule has {} entries for {k} devices",
                schedule.len()
            )));
        }
        let cycles = scn.ordered_cycles(schedule);
        let fs = cycles.iter().cloned().fold(0.0, f64::max);
        let t = scn.deadline;
        let hp = scn.params.harvest_power();
        let mut demand = Vec::with_capacity(k);
        let mut harvest = Vec::with_capacity(k);
        for n in 1..=k {
            let task = &scn.tasks[schedule.device_at(n)];
            let h = task.channel_gain;
            demand.push(task.tx_requirement(&scn.params) / (h * hp * t.powi(3)));
            harvest.push(h * hp * t);
        }
        let mut x_index = SlotMatrix::zeros(k).map(|_, _, _| -1.0);
        let mut next = k + 2;
        for (n, m) in x_index.clone().indices() {
            if xvars == XVars::All || (xvars == XVars::LastSlot && m == k + 1) {
                x_index.set(n, m, next as f64);
                next += 1;
            }
        }
        Ok(Self {
            k,
            fs,
            t,
            demand,
            harvest,
            cycles,
            x_index,
            num_vars: next,
        })
    }

    fn xi(&self, n: usize, m: usize) -> Option<usize> {
        let v = self.x_index.at(n, m);
        (v >= 0.0).then_some(v as usize)
    }

    fn tau_start(&self) -> Vec<f64> {
        vec![1.0 / (self.k as f64 + 3.0); self.k + 2]
    }

    /// `Σ τ <= 1`.
    fn budget_row(&self) -> Constraint {
        Constraint::linear((0..self.k + 2).map(|i| (i, 1.0)).collect(), 1.0)
    }

    /// `D_n τ_n^{-2} − Σ_{i<n} τ_i − slack ≤ 0`.
    fn causality_row(&self, n: usize, slack: Option<usize>) -> Constraint {
        let mut linear: Vec<(usize, f64)> = (0..n).map(|i| (i, -1.0)).collect();
        if let Some(s) = slack {
            linear.push((s, -1.0));
        }
        Constraint {
            linear,
            terms: vec![Term::InvPow {
                c: self.demand[n - 1],
                lin: vec![(n, 1.0)],
                offset: 0.0,
                p: 2.0,
            }],
            rhs: 0.0,
            hard: false,
        }
    }

    /// `Σ_{n<m} χ_{n,m} − (F_max T / F_s) τ_m ≤ 0`.
    fn capacity_row(&self, m: usize, f_max: f64) -> Constraint {
        let mut lin: Vec<(usize, f64)> = (1..m).filter_map(|n| self.xi(n, m)).map(|j| (j, 1.0)).collect();
        lin.push((m, -f_max * self.t / self.fs));
        Constraint::linear(lin, 0.0)
    }

    /// `F_n / F_s − Σ_m χ_{n,m} − slack ≤ 0`.
    fn completion_row(&self, n: usize, slack: Option<usize>) -> Constraint {
        let mut lin: Vec<(usize, f64)> = (n + 1..=self.k + 1)
            .filter_map(|m| self.xi(n, m))
            .map(|j| (j, -1.0))
            .collect();
        if let Some(s) = slack {
            lin.push((s, -1.0));
        }
        Constraint::linear(lin, -self.cycles[n - 1] / self.fs)
    }

    fn energy_terms(&self) -> Vec<Term> {
        self.x_index
            .indices()
            .filter_map(|(n, m)| self.xi(n, m).map(|j| (j, m)))
            .map(|(j, m)| Term::PerspCube {
                w: 1.0,
                x: j,
                t: Some(m),
                t_const: 0.0,
            })
            .collect()
    }

    fn unscale_dt(&self, z: &[f64]) -> TimeAllocation {
        TimeAllocation {
            dt: z[..self.k + 2].iter().map(|v| v * self.t).collect(),
        }
    }

    fn unscale_x(&self, z: &[f64]) -> SlotMatrix {
        self.x_index
            .map(|_, _, idx| if idx >= 0.0 { z[idx as usize] * self.fs } else { 0.0 })
    }
}

/// Joint problem in scaled form. Rows: budget (0), causality (1..=K),
/// capacity (K+1..=2K), completion (2K+1..=3K), then variable bounds.
fn primal_problem(lay: &JointLayout, f_max: f64) -> Problem {
    let k = lay.k;
    let mut prob = Problem {
        num_vars: lay.num_vars,
        obj_terms: lay.energy_terms(),
        ..Default::default()
    };
    prob.constraints.push(lay.budget_row());
    for n in 1..=k {
        prob.constraints.push(lay.causality_row(n, None));
    }
    for m in 2..=k + 1 {
        prob.constraints.push(lay.capacity_row(m, f_max));
    }
    for n in 1..=k {
        prob.constraints.push(lay.completion_row(n, None));
    }
    for j in 0..lay.num_vars {
        prob.constraints.push(Constraint::nonneg(j));
    }
    prob
}

/// KKT residual of a candidate joint solution with SI multipliers, in the
/// scaled units the oracle uses. Bound multipliers are chosen optimally.
#[allow(clippy::too_many_arguments)]
pub fn primal_kkt_residual(
    scn: &Scenario,
    schedule: &Schedule,
    dt: &TimeAllocation,
    x: &SlotMatrix,
    rho: &[f64],
    beta: &[f64],
    omega: &[f64],
    xi: f64,
) -> Result<f64> {
    let lay = JointLayout::new(scn, schedule, XVars::All)?;
    let k = lay.k;
    let prob = primal_problem(&lay, scn.f_max);
    let mut z: Vec<f64> = dt.dt.iter().map(|v| v / lay.t).collect();
    z.resize(lay.num_vars, 0.0);
    for (n, m) in lay.x_index.indices() {
        if let Some(j) = lay.xi(n, m) {
            z[j] = x.at(n, m) / lay.fs;
        }
    }
    let e0 = scn.params.server_energy_coef * lay.fs.powi(3) / lay.t.powi(2);
    let mut u = vec![0.0; prob.constraints.len()];
    u[0] = xi * lay.t / e0;
    for n in 1..=k {
        u[n] = rho[n - 1] * lay.harvest[n - 1] / e0;
        u[2 * k + n] = beta[n - 1] * lay.fs / e0;
    }
    for m in 2..=k + 1 {
        u[k + m - 1] = omega[m] * lay.fs / e0;
    }
    // Bound multipliers absorb any positive stationarity remainder.
    let bounds0 = 3 * k + 1;
    let mut stat = prob.objective_gradient(&z);
    for (c, ui) in prob.constraints[..bounds0].iter().zip(&u) {
        for (j, g) in c.gradient(&z, lay.num_vars).into_iter().enumerate() {
            stat[j] += ui * g;
        }
    }
    for j in 0..lay.num_vars {
        u[bounds0 + j] = stat[j].max(0.0);
    }
    Ok(kkt_residual(&prob, &z, &u))
}

/// Joint time split and computation amounts for a fixed schedule.
pub fn solve_primal_oracle(scn: &Scenario, schedule: &Schedule, opts: &IpmOptions) -> Result<PrimalOracle> {
    let lay = JointLayout::new(scn, schedule, XVars::All)?;
    let k = lay.k;
    let prob = primal_problem(&lay, scn.f_max);
    let budget = 0;
    let caus0 = 1;
    let cap0 = k + 1;
    let done0 = 2 * k + 1;
    let mut start = lay.tau_start();
    start.resize(lay.num_vars, 1e-3);
    let r = ipm::solve(&prob, &start, opts)?;

    let kappa = scn.params.server_energy_coef;
    let e0 = kappa * lay.fs.powi(3) / lay.t.powi(2);
    let u = &r.duals;
    let rho = (1..=k).map(|n| u[caus0 + n - 1] * e0 / lay.harvest[n - 1]).collect();
    let mut omega = vec![0.0; k + 2];
    for m in 2..=k + 1 {
        omega[m] = u[cap0 + m - 2] * e0 / lay.fs;
    }
    let beta = (1..=k).map(|n| u[done0 + n - 1] * e0 / lay.fs).collect();
    let xi = u[budget] * e0 / lay.t;
    Ok(PrimalOracle {
        dt: lay.unscale_dt(&r.z),
        x: lay.unscale_x(&r.z),
        energy: r.objective * e0,
        rho,
        beta,
        omega,
        xi,
        solution: finish(&prob, r),
    })
}

/// Minimizes the normalized causality and completion slacks; always
/// feasible.
pub fn solve_feasibility(scn: &Scenario, schedule: &Schedule, opts: &IpmOptions) -> Result<FeasibilityOracle> {
    feasibility(scn, schedule, XVars::All, opts)
}

/// Slack problem with all computation confined to the last slot.
pub fn solve_sync_feasibility(scn: &Scenario, schedule: &Schedule, opts: &IpmOptions) -> Result<FeasibilityOracle> {
    feasibility(scn, schedule, XVars::LastSlot, opts)
}

fn feasibility(scn: &Scenario, schedule: &Schedule, xvars: XVars, opts: &IpmOptions) -> Result<FeasibilityOracle> {
    let lay = JointLayout::new(scn, schedule, xvars)?;
    let k = lay.k;
    let zeta0 = lay.num_vars;
    let iota0 = zeta0 + k;
    let nv = iota0 + k;
    let mut prob = Problem {
        num_vars: nv,
        obj_linear: (zeta0..nv).map(|j| (j, 1.0)).collect(),
        ..Default::default()
    };
    prob.constraints.push(lay.budget_row());
    let caus0 = prob.constraints.len();
    for n in 1..=k {
        prob.constraints.push(lay.causality_row(n, Some(zeta0 + n - 1)));
    }
    for m in 2..=k + 1 {
        prob.constraints.push(lay.capacity_row(m, scn.f_max));
    }
    let done0 = prob.constraints.len();
    for n in 1..=k {
        prob.constraints.push(lay.completion_row(n, Some(iota0 + n - 1)));
    }
    for j in 0..nv {
        prob.constraints.push(Constraint::nonneg(j));
    }
    let mut start = lay.tau_start();
    start.resize(lay.num_vars, 1e-3 / k as f64);
    for n in 1..=k {
        let tau = start[n];
        let prefix: f64 = start[..n].iter().sum();
        start.push((lay.demand[n - 1] / (tau * tau) - prefix).max(0.0) + 1.0);
    }
    for n in 1..=k {
        start.push(lay.cycles[n - 1] / lay.fs + 1.0);
    }
    let r = ipm::solve(&prob, &start, opts)?;
    let zeta = (0..k).map(|i| r.z[zeta0 + i] * lay.harvest[i]).collect();
    let iota = (0..k).map(|i| r.z[iota0 + i] * lay.fs).collect();
    let rho_hat = (0..k).map(|i| r.duals[caus0 + i] / lay.harvest[i]).collect();
    let beta_hat = (0..k).map(|i| r.duals[done0 + i] / lay.fs).collect();
    Ok(FeasibilityOracle {
        objective: r.objective,
        dt: lay.unscale_dt(&r.z),
        x: lay.unscale_x(&r.z),
        zeta,
        iota,
        rho_hat,
        beta_hat,
        solution: finish(&prob, r),
    })
}

/// Optimal time split for fixed computation amounts `x` (cycles).
pub fn solve_time_oracle(
    scn: &Scenario,
    schedule: &Schedule,
    x: &SlotMatrix,
    opts: &IpmOptions,
) -> Result<TimeOracle> {
    let lay = JointLayout::new(scn, schedule, XVars::None)?;
    let k = lay.k;
    let mut prob = Problem {
        num_vars: k + 2,
        ..Default::default()
    };
    for m in 2..=k + 1 {
        let cube: f64 = (1..m).map(|n| (x.at(n, m) / lay.fs).powi(3)).sum();
        if cube > 0.0 {
            prob.obj_terms.push(Term::InvPow {
                c: cube,
                lin: vec![(m, 1.0)],
                offset: 0.0,
                p: 2.0,
            });
        }
    }
    let budget = prob.constraints.len();
    prob.constraints.push(lay.budget_row());
    let caus0 = prob.constraints.len();
    for n in 1..=k {
        prob.constraints.push(lay.causality_row(n, None));
    }
    let mut cap_rows = vec![usize::MAX; k + 2];
    for m in 2..=k + 1 {
        let load: f64 = (1..m).map(|n| x.at(n, m)).sum::<f64>() / lay.fs;
        cap_rows[m] = prob.constraints.len();
        prob
            .constraints
            .push(Constraint::linear(vec![(m, -scn.f_max * lay.t / lay.fs)], -load));
    }
    for j in 0..k + 2 {
        prob.constraints.push(Constraint::nonneg(j));
    }
    let r = ipm::solve(&prob, &lay.tau_start(), opts)?;
    let kappa = scn.params.server_energy_coef;
    let e0 = kappa * lay.fs.powi(3) / lay.t.powi(2);
    let rho = (1..=k).map(|n| r.duals[caus0 + n - 1] * e0 / lay.harvest[n - 1]).collect();
    let mut omega = vec![0.0; k + 2];
    for m in 2..=k + 1 {
        omega[m] = r.duals[cap_rows[m]] * e0 / lay.fs;
    }
    let xi = r.duals[budget] * e0 / lay.t;
    Ok(TimeOracle {
        dt: lay.unscale_dt(&r.z),
        energy: r.objective * e0,
        rho,
        omega,
        xi,
        solution: finish(&prob, r),
    })
}

/// Restriction of the joint problem used by a comparison scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Restriction {
    /// All computation in the last slot, after every task has arrived.
    Sync,
    /// One constant frequency per task over all of its computing slots.
    RowConstant,
}

/// Optimal time split under a [`Restriction`]. `capacity[m]` is the SI
/// multiplier of the slot-`m` capacity row: J/cycle for `Sync` (row
/// `Σ F_n ≤ F_max Δt_{K+1}`), J/Hz for `RowConstant` (row
/// `Σ_{n<m} F_n / W_n ≤ F_max`, `W_n = Σ_{m>n} Δt_m`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestrictedOracle {
    pub dt: TimeAllocation,
    pub energy: f64,
    pub rho: Vec<f64>,
    pub capacity: Vec<f64>,
    pub xi: f64,
    pub solution: ConvexSolution,
}

/// Slot-duration problem for a comparison scheme with a fixed schedule.
pub fn solve_restricted_oracle(
    scn: &Scenario,
    schedule: &Schedule,
    restriction: Restriction,
    opts: &IpmOptions,
) -> Result<RestrictedOracle> {
    let lay = JointLayout::new(scn, schedule, XVars::None)?;
    let k = lay.k;
    let f_max = scn.f_max;
    let mut prob = Problem {
        num_vars: k + 2,
        ..Default::default()
    };
    let window = |n: usize| (n + 1..=k + 1).map(|m| (m, 1.0)).collect::<Vec<_>>();
    match restriction {
        Restriction::Sync => {
            let cube: f64 = lay.cycles.iter().map(|c| (c / lay.fs).powi(3)).sum();
            prob.obj_terms.push(Term::InvPow {
                c: cube,
                lin: vec![(k + 1, 1.0)],
                offset: 0.0,
                p: 2.0,
            });
        }
        Restriction::RowConstant => {
            for n in 1..=k {
                let c = (lay.cycles[n - 1] / lay.fs).powi(3);
                if c > 0.0 {
                    prob.obj_terms.push(Term::InvPow {
                        c,
                        lin: window(n),
                        offset: 0.0,
                        p: 2.0,
                    });
                }
            }
        }
    }
    let budget = prob.constraints.len();
    prob.constraints.push(lay.budget_row());
    let caus0 = prob.constraints.len();
    for n in 1..=k {
        prob.constraints.push(lay.causality_row(n, None));
    }
    let mut cap_rows = vec![usize::MAX; k + 2];
    match restriction {
        Restriction::Sync => {
            let load: f64 = lay.cycles.iter().sum::<f64>() / lay.fs;
            cap_rows[k + 1] = prob.constraints.len();
            prob
                .constraints
                .push(Constraint::linear(vec![(k + 1, -f_max * lay.t / lay.fs)], -load));
        }
        Restriction::RowConstant => {
            for m in 2..=k + 1 {
                let terms: Vec<Term> = (1..m)
                    .filter(|&n| lay.cycles[n - 1] > 0.0)
                    .map(|n| Term::InvPow {
                        c: lay.cycles[n - 1] / (f_max * lay.t),
                        lin: window(n),
                        offset: 0.0,
                        p: 1.0,
                    })
                    .collect();
                if !terms.is_empty() {
                    cap_rows[m] = prob.constraints.len();
                    prob.constraints.push(Constraint {
                        linear: Vec::new(),
                        terms,
                        rhs: 1.0,
                        hard: false,
                    });
                }
            }
        }
    }
    for j in 0..k + 2 {
        prob.constraints.push(Constraint::nonneg(j));
    }
    let r = ipm::solve(&prob, &lay.tau_start(), opts)?;
    let kappa = scn.params.server_energy_coef;
    let e0 = kappa * lay.fs.powi(3) / lay.t.powi(2);
    let rho = (1..=k).map(|n| r.duals[caus0 + n - 1] * e0 / lay.harvest[n - 1]).collect();
    let unit = match restriction {
        Restriction::Sync => lay.fs,
        Restriction::RowConstant => f_max,
    };
    let capacity = cap_rows
        .iter()
        .map(|&row| if row == usize::MAX { 0.0 } else { r.duals[row] * e0 / unit })
        .collect();
    let xi = r.duals[budget] * e0 / lay.t;
    Ok(RestrictedOracle {
        dt: lay.unscale_dt(&r.z),
        energy: r.objective * e0,
        rho,
        capacity,
        xi,
        solution: finish(&prob, r),
    })
}
