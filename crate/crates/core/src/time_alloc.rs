//! Slot durations for given computation amounts, and the alternating
//! primal solve over (durations, frequencies) for a fixed schedule.

use serde::{Deserialize, Serialize};

use crate::convex::{self, FeasibilityOracle, IpmOptions};
use crate::error::{Error, Result};
use crate::freq_alloc::{self, AllocOptions, FrequencyPlan, SlotMatrix};
use crate::scenario::{Scenario, Schedule, TimeAllocation};

/// Computation amounts `x_{n,m} = f_{n,m} Δt_m` (cycles).
pub type ComputationPlan = SlotMatrix;

/// Multipliers of the joint problem indexed by offloading order:
/// `rho` (causality, J/J), `beta` (completion, J/cycle), `omega` (capacity
/// per slot, J/cycle, entries 0 and 1 unused), `xi` (deadline, J/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDuals {
    pub rho: Vec<f64>,
    pub beta: Vec<f64>,
    pub omega: Vec<f64>,
    pub xi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PrimalMethod {
    Alternating,
    /// The alternating scheme stalled or failed certification.
    Fallback,
    Oracle,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrimalSolution {
    pub dt: TimeAllocation,
    pub x: ComputationPlan,
    pub f: FrequencyPlan,
    pub energy: f64,
    pub duals: JointDuals,
    pub converged: bool,
    pub iterations: usize,
    pub method: PrimalMethod,
    /// Energy after each accepted alternating step.
    pub trace: Vec<f64>,
    /// KKT residual of the returned point and multipliers (scaled units).
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimalOptions {
    pub bcd_tol: f64,
    pub max_iter: usize,
    pub alloc: AllocOptions,
    pub ipm: IpmOptions,
    /// Normalized slack above which a schedule is declared infeasible.
    pub feas_tol: f64,
    /// KKT residual the alternating result must meet to be accepted.
    pub certify_tol: f64,
    /// Skip the alternating scheme and solve jointly.
    pub oracle_only: bool,
}

impl Default for PrimalOptions {
    fn default() -> Self {
        Self {
            bcd_tol: 1e-6,
            max_iter: 50,
            alloc: AllocOptions::default(),
            ipm: IpmOptions::default(),
            feas_tol: 1e-6,
            certify_tol: 1e-5,
            oracle_only: false,
        }
    }
}

/// `Ψ(x) = (R − x) x^2 h^2 η P0 − λ A^3`: energy surplus of the first
/// device when `R` is shared between harvesting and its transmission.
pub fn psi(x: f64, t_remaining: f64, h: f64, harvest_power: f64, lambda: f64, a_bits: f64) -> f64 {
    (t_remaining - x) * x * x * h * h * harvest_power - lambda * a_bits.powi(3)
}

/// Smallest first-slot duration that keeps the first device's energy
/// causal: the root of `Ψ` in `(0, 2R/3]`, where `Ψ` increases.
pub fn psi_root(t_remaining: f64, h: f64, harvest_power: f64, lambda: f64, a_bits: f64, eps0: f64) -> Result<f64> {
    if !(t_remaining > 0.0) {
        return Err(Error::infeasible("no time left for harvesting and transmission"));
    }
    let f = |x: f64| psi(x, t_remaining, h, harvest_power, lambda, a_bits);
    let mut hi = 2.0 * t_remaining / 3.0;
    if f(hi) < 0.0 {
        return Err(Error::Infeasible {
            reason: "first device cannot harvest enough energy in the remaining time".into(),
            required: None,
        });
    }
    let mut lo = 0.0;
    if f(lo) >= 0.0 {
        return Ok(0.0);
    }
    while hi - lo > eps0 * t_remaining {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Slot durations implied by computation amounts `x` and multipliers:
/// `Δt_i^3 = (2κ h_i Σ_n x_{n,i}^3 + 2ρ_i λ A_i^3) / (ξ h_i − Σ_{n>i} ρ_n h_n h_i η P0 − ω_i h_i F_max)`
/// for `2 <= i <= K`, `Δt_{K+1}^3 = 2κ Σ_n x_{n,K+1}^3 / (ξ − ω_{K+1} F_max)`,
/// `Δt_1` from [`psi_root`] and `Δt_0` the remainder of the deadline.
pub fn update_times(
    x: &ComputationPlan,
    duals: &JointDuals,
    scn: &Scenario,
    schedule: &Schedule,
    eps0: f64,
) -> Result<TimeAllocation> {
    let k = scn.num_devices();
    let p = &scn.params;
    let kappa = p.server_energy_coef;
    let hp = p.harvest_power();
    let h: Vec<f64> = (1..=k).map(|n| scn.tasks[schedule.device_at(n)].channel_gain).collect();
    let mut dt = vec![0.0; k + 2];
    for i in 2..=k + 1 {
        let cubes: f64 = (1..i).map(|n| x.at(n, i).powi(3)).sum();
        let (num, den) = if i == k + 1 {
            (2.0 * kappa * cubes, duals.xi - duals.omega[i] * scn.f_max)
        } else {
            let task = &scn.tasks[schedule.device_at(i)];
            let later: f64 = (i + 1..=k).map(|n| duals.rho[n - 1] * h[n - 1]).sum();
            let hi = h[i - 1];
            (
                2.0 * kappa * hi * cubes + 2.0 * duals.rho[i - 1] * p.tx_energy_coef * task.data_bits.powi(3),
                duals.xi * hi - later * hi * hp - duals.omega[i] * hi * scn.f_max,
            )
        };
        if num <= 0.0 {
            continue;
        }
        if !(den > 0.0) {
            return Err(Error::Domain(format!("non-positive denominator in slot {i}")));
        }
        dt[i] = (num / den).cbrt();
    }
    let rest: f64 = dt[2..].iter().sum();
    let first = &scn.tasks[schedule.device_at(1)];
    let remaining = scn.deadline - rest;
    dt[1] = psi_root(remaining, h[0], hp, p.tx_energy_coef, first.data_bits, eps0)?;
    dt[0] = scn.deadline - dt[1] - rest;
    TimeAllocation::new(dt)
}

/// Outcome of a primal solve: either an optimal point or the slack problem
/// that certifies infeasibility.
#[derive(Debug, Clone)]
pub enum PrimalOutcome {
    Feasible(Box<PrimalSolution>),
    Infeasible(Box<FeasibilityOracle>),
}

fn x_from_f(f: &FrequencyPlan, dt: &TimeAllocation) -> ComputationPlan {
    f.map(|_, m, v| v * dt[m])
}

fn energy_of(x: &ComputationPlan, dt: &TimeAllocation, kappa: f64) -> f64 {
    x.indices()
        .map(|(n, m)| {
            let v = x.at(n, m);
            if v > 0.0 {
                kappa * v.powi(3) / dt[m].powi(2)
            } else {
                0.0
            }
        })
        .sum()
}

fn from_oracle(scn: &Scenario, r: convex::PrimalOracle, method: PrimalMethod, iterations: usize, trace: Vec<f64>) -> PrimalSolution {
    let f = r.x.map(|_, m, v| if r.dt[m] > 0.0 { v / r.dt[m] } else { 0.0 });
    let _ = scn;
    PrimalSolution {
        energy: r.energy,
        kkt_residual: r.solution.kkt_residual,
        dt: r.dt,
        x: r.x,
        f,
        duals: JointDuals {
            rho: r.rho,
            beta: r.beta,
            omega: r.omega,
            xi: r.xi,
        },
        converged: true,
        iterations,
        method,
        trace,
    }
}

/// Joint optimum for one schedule. Infeasible schedules return the slack
/// problem instead of an error.
pub fn solve_primal(scn: &Scenario, schedule: &Schedule, opts: &PrimalOptions) -> Result<PrimalOutcome> {
    let feas = convex::solve_feasibility(scn, schedule, &opts.ipm)?;
    if feas.objective > opts.feas_tol {
        return Ok(PrimalOutcome::Infeasible(Box::new(feas)));
    }
    let oracle = |method, iterations, trace| -> Result<PrimalOutcome> {
        match convex::solve_primal_oracle(scn, schedule, &opts.ipm) {
            Ok(r) => Ok(PrimalOutcome::Feasible(Box::new(from_oracle(scn, r, method, iterations, trace)))),
            Err(e) if e.is_infeasible() => Ok(PrimalOutcome::Infeasible(Box::new(feas.clone()))),
            Err(e) => Err(e),
        }
    };
    if opts.oracle_only {
        return oracle(PrimalMethod::Oracle, 0, Vec::new());
    }
    match alternate(scn, schedule, feas.dt.clone(), opts) {
        Ok(sol) if sol.converged && sol.kkt_residual <= opts.certify_tol => Ok(PrimalOutcome::Feasible(Box::new(sol))),
        Ok(sol) => oracle(PrimalMethod::Fallback, sol.iterations, sol.trace),
        Err(_) => oracle(PrimalMethod::Fallback, 0, Vec::new()),
    }
}

/// Alternating solve with the joint oracle as fallback; infeasible
/// schedules are reported as `Infeasible` errors.
pub fn solve_primal_bcd(scn: &Scenario, schedule: &Schedule, opts: &PrimalOptions) -> Result<PrimalSolution> {
    match solve_primal(scn, schedule, opts)? {
        PrimalOutcome::Feasible(sol) => Ok(*sol),
        PrimalOutcome::Infeasible(feas) => Err(Error::Infeasible {
            reason: format!("schedule {schedule} infeasible (normalized slack {:.3e})", feas.objective),
            required: None,
        }),
    }
}

/// Alternates optimal frequencies for fixed durations with optimal
/// durations for fixed computation amounts.
fn alternate(scn: &Scenario, schedule: &Schedule, start: TimeAllocation, opts: &PrimalOptions) -> Result<PrimalSolution> {
    let k = scn.num_devices();
    let kappa = scn.params.server_energy_coef;
    let cycles = scn.ordered_cycles(schedule);
    let mut dt = start;
    let mut trace = Vec::new();
    let mut prev = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    let mut t_duals = JointDuals {
        rho: vec![0.0; k],
        beta: vec![0.0; k],
        omega: vec![0.0; k + 2],
        xi: 0.0,
    };
    let mut closed_form_ok = true;
    while iterations < opts.max_iter {
        iterations += 1;
        let fa = freq_alloc::allocate_frequencies(&cycles, &dt, scn.f_max, kappa, &opts.alloc)?;
        let x = x_from_f(&fa.plan, &dt);
        let t = convex::solve_time_oracle(scn, schedule, &x, &opts.ipm)?;
        t_duals.rho = t.rho.clone();
        t_duals.omega = t.omega.clone();
        t_duals.xi = t.xi;
        // The closed form must reproduce the solver's durations.
        if let Ok(cf) = update_times(&x, &t_duals, scn, schedule, 1e-13) {
            let rho1 = t.rho[0] * scn.tasks[schedule.device_at(1)].channel_gain * scn.params.harvest_power();
            let compare_from = if rho1 > 1e-9 * t.xi.max(f64::MIN_POSITIVE) { 0 } else { 2 };
            let worst = (compare_from..k + 2)
                .map(|i| (cf[i] - t.dt[i]).abs())
                .fold(0.0, f64::max);
            closed_form_ok &= worst <= 1e-4 * scn.deadline;
        } else {
            closed_form_ok = false;
        }
        let energy = energy_of(&x, &t.dt, kappa);
        if energy > prev * (1.0 + 1e-9) {
            // Non-monotone: numerical trouble, let the caller fall back.
            break;
        }
        trace.push(energy);
        dt = t.dt;
        let change = (prev - energy).abs() / energy.max(f64::MIN_POSITIVE);
        prev = energy;
        if change < opts.bcd_tol {
            converged = true;
            break;
        }
    }
    let fa = freq_alloc::allocate_frequencies(&cycles, &dt, scn.f_max, kappa, &opts.alloc)?;
    let x = x_from_f(&fa.plan, &dt);
    let energy = energy_of(&x, &dt, kappa);
    let duals = JointDuals {
        rho: t_duals.rho,
        beta: fa.duals.beta.clone(),
        omega: t_duals.omega,
        xi: t_duals.xi,
    };
    let kkt = convex::primal_kkt_residual(scn, schedule, &dt, &x, &duals.rho, &duals.beta, &duals.omega, duals.xi)?;
    Ok(PrimalSolution {
        dt,
        x,
        f: fa.plan,
        energy,
        duals,
        converged: converged && closed_form_ok,
        iterations,
        method: PrimalMethod::Alternating,
        trace,
        kkt_residual: kkt,
    })
}
