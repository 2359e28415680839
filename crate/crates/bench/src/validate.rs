//! Randomized invariant checks over seeded instances.

use std::path::Path;

use amec_core::baselines::{solve_exhaustive, solve_random, RestrictedPrimal};
use amec_core::convex::{solve_freq_oracle, IpmOptions, Restriction};
use amec_core::freq_alloc::{
    allocate_frequencies, column_coincidence_ok, eval_energy, observed_break, plan_violation, primal_from_duals,
    row_pattern_ok, transition_point, AllocOptions, TransitionVerdict,
};
use amec_core::gbd::{self, PrimalSolver};
use amec_core::scenario::{generate_scenario, load_json, save_report, Scenario, ScenarioConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sweep::RunOptions;

pub const CHECKS: [&str; 6] = [
    "row_property",
    "column_property",
    "transition_consistency",
    "oracle_sandwich",
    "dominance_chain",
    "bound_monotonicity",
];

/// Frequency tolerance relative to `F_max`.
pub const FREQ_TOL: f64 = 1e-6;
/// Relative energy agreement between allocator, oracle and joint solve.
pub const ENERGY_TOL: f64 = 1e-4;
/// Relative slack in dominance comparisons.
pub const DOMINANCE_TOL: f64 = 1e-6;
/// Exhaustive enumeration is part of the dominance check up to this K.
pub const EXHAUSTIVE_K: usize = 5;
/// Relative scaling applied to every task price in fault-injection mode.
pub const DUAL_PERTURBATION: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct ValidateOptions {
    pub instances: usize,
    pub k_max: usize,
    pub base_seed: u64,
    pub perturb_duals: bool,
    pub run: RunOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub seed: u64,
    pub k: usize,
    /// `false` when no schedule was found; no checks run then.
    pub feasible: bool,
    pub checks: Vec<CheckOutcome>,
}

impl InstanceReport {
    pub fn first_failure(&self) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| !c.passed)
    }
}

/// A failing instance in replayable form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureCase {
    pub seed: u64,
    pub perturb_duals: bool,
    pub check: String,
    pub detail: String,
    pub scenario: Scenario,
}

#[derive(Debug, Clone)]
pub struct ValidateReport {
    pub instances: Vec<InstanceReport>,
    pub first_failure: Option<FailureCase>,
}

impl ValidateReport {
    pub fn checked(&self) -> usize {
        self.instances.iter().map(|i| i.checks.len()).sum()
    }

    pub fn failed(&self) -> usize {
        self.instances.iter().flat_map(|i| &i.checks).filter(|c| !c.passed).count()
    }

    pub fn infeasible(&self) -> usize {
        self.instances.iter().filter(|i| !i.feasible).count()
    }

    /// `(check, passed, failed)` in [`CHECKS`] order.
    pub fn tally(&self) -> Vec<(&'static str, usize, usize)> {
        CHECKS
            .iter()
            .map(|&name| {
                let (p, f) = self
                    .instances
                    .iter()
                    .flat_map(|i| &i.checks)
                    .filter(|c| c.name == name)
                    .fold((0, 0), |(p, f), c| if c.passed { (p + 1, f) } else { (p, f + 1) });
                (name, p, f)
            })
            .collect()
    }
}

fn outcome(name: &str, passed: bool, detail: impl Into<String>) -> CheckOutcome {
    CheckOutcome {
        name: name.to_string(),
        passed,
        detail: detail.into(),
    }
}

fn verdict_slot(v: TransitionVerdict) -> Option<usize> {
    match v {
        TransitionVerdict::TransitionAt(i) => Some(i),
        _ => None,
    }
}

/// Runs every check on one instance.
pub fn check_scenario(scn: &Scenario, perturb_duals: bool, run: &RunOptions) -> Result<InstanceReport> {
    let k = scn.num_devices();
    let mut report = InstanceReport {
        seed: scn.seed,
        k,
        feasible: true,
        checks: Vec::new(),
    };
    let primal = run.primal.solver();
    let solved = match gbd::run(scn, &primal, &run.gbd) {
        Ok(r) => r,
        Err(e) if e.is_infeasible() => {
            report.feasible = false;
            return Ok(report);
        }
        Err(e) => return Err(e.into()),
    };
    let checks = &mut report.checks;
    checks.push(outcome(
        "bound_monotonicity",
        solved.bounds_monotone(),
        format!("{} iterations", solved.trace.len()),
    ));

    let schedule = &solved.schedule;
    let dt = &solved.solution.dt;
    let cycles = scn.ordered_cycles(schedule);
    let kappa = scn.params.server_energy_coef;
    let f_max = scn.f_max;
    let tol = FREQ_TOL * f_max;

    let alloc = allocate_frequencies(&cycles, dt, f_max, kappa, &AllocOptions::default())?;
    let plan = if perturb_duals {
        let mut duals = alloc.duals.clone();
        duals.beta.iter_mut().for_each(|b| *b *= 1.0 + DUAL_PERTURBATION);
        primal_from_duals(&duals, dt, kappa)
    } else {
        alloc.plan.clone()
    };
    let energy = eval_energy(&plan, dt, kappa);
    let oracle = solve_freq_oracle(&cycles, dt, f_max, kappa, &IpmOptions::default())?;

    checks.push(outcome("row_property", row_pattern_ok(&plan, tol), ""));
    checks.push(outcome("column_property", column_coincidence_ok(&plan, dt, tol), ""));

    let predicted = verdict_slot(transition_point(&cycles, dt, f_max)?);
    let observed = observed_break(&plan, tol);
    checks.push(outcome(
        "transition_consistency",
        predicted == observed,
        format!("predicted {predicted:?}, observed {observed:?}"),
    ));

    let violation = plan_violation(&plan, &cycles, dt, f_max);
    let vs_oracle = (energy - oracle.energy).abs() / oracle.energy;
    let vs_joint = (energy - solved.solution.energy).abs() / solved.solution.energy;
    checks.push(outcome(
        "oracle_sandwich",
        violation <= FREQ_TOL && vs_oracle <= ENERGY_TOL && vs_joint <= ENERGY_TOL,
        format!("violation {violation:.3e}, vs oracle {vs_oracle:.3e}, vs joint {vs_joint:.3e}"),
    ));

    let e = solved.energy;
    let mut dominance = Vec::new();
    for restriction in [Restriction::RowConstant, Restriction::Sync] {
        let r = RestrictedPrimal::new(restriction).solve(scn, schedule);
        match r {
            Ok(sol) if e > sol.energy * (1.0 + DOMINANCE_TOL) => {
                dominance.push(format!("{restriction:?} {:.9e} < joint {e:.9e}", sol.energy))
            }
            Ok(_) => {}
            Err(err) if err.is_infeasible() => {}
            Err(err) => return Err(err.into()),
        }
    }
    if k <= EXHAUSTIVE_K {
        let best = solve_exhaustive(scn, &primal, EXHAUSTIVE_K)?;
        let random = solve_random(scn, scn.seed, &primal as &dyn PrimalSolver)?;
        for (label, other) in [("proposed", e), ("random", random.energy)] {
            if other.is_finite() && best.energy > other * (1.0 + DOMINANCE_TOL) {
                dominance.push(format!("exhaustive {:.9e} > {label} {other:.9e}", best.energy));
            }
        }
    }
    checks.push(outcome("dominance_chain", dominance.is_empty(), dominance.join("; ")));
    Ok(report)
}

/// `opts.instances` instances with `K` cycling through `2..=k_max` and
/// seeds counting up from `base_seed`.
pub fn run_validate(cfg: &ScenarioConfig, opts: &ValidateOptions) -> Result<ValidateReport> {
    let k_max = opts.k_max.max(2);
    let jobs: Vec<(usize, u64)> = (0..opts.instances)
        .map(|i| (2 + i % (k_max - 1), opts.base_seed + i as u64))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(k, seed)| {
            let scn = generate_scenario(&ScenarioConfig { k, ..cfg.clone() }, seed)?;
            let rep = check_scenario(&scn, opts.perturb_duals, &opts.run)?;
            Ok((scn, rep))
        })
        .collect::<Result<Vec<_>>>()?;
    let first_failure = results.iter().find_map(|(scn, rep)| {
        rep.first_failure().map(|c| FailureCase {
            seed: rep.seed,
            perturb_duals: opts.perturb_duals,
            check: c.name.clone(),
            detail: c.detail.clone(),
            scenario: scn.clone(),
        })
    });
    Ok(ValidateReport {
        instances: results.into_iter().map(|(_, r)| r).collect(),
        first_failure,
    })
}

pub fn save_failure(path: impl AsRef<Path>, case: &FailureCase) -> Result<()> {
    Ok(save_report(path, case)?)
}

/// Re-runs the checks on a saved failing instance.
pub fn replay(path: impl AsRef<Path>, run: &RunOptions) -> Result<(FailureCase, InstanceReport)> {
    let case: FailureCase = load_json(path)?;
    let rep = check_scenario(&case.scenario, case.perturb_duals, run)?;
    Ok((case, rep))
}
