//! Comparison schemes: restricted frequency models, random scheduling and
//! exhaustive enumeration over schedules.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex::{self, IpmOptions, Restriction};
use crate::error::{Error, Result};
use crate::freq_alloc::{eval_energy, FrequencyPlan, SlotMatrix};
use crate::gbd::{self, Evaluation, GbdOptions, GbdStatus, PrimalSolver, SolveReport};
use crate::master::next_permutation;
use crate::scenario::{instance_rng, Scenario, Schedule, TimeAllocation};
use crate::time_alloc::{JointDuals, PrimalMethod, PrimalSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    Proposed,
    Jsora,
    Sync,
    Random,
    Exhaustive,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::Proposed, Scheme::Jsora, Scheme::Sync, Scheme::Random, Scheme::Exhaustive];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "Proposed",
            Scheme::Jsora => "JSORA",
            Scheme::Sync => "Sync",
            Scheme::Random => "Random",
            Scheme::Exhaustive => "Exhaustive",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::config("schemes", format!("unknown scheme {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemeStatus {
    Ok,
    Infeasible,
    IterationLimit,
}

impl SchemeStatus {
    pub fn name(self) -> &'static str {
        match self {
            SchemeStatus::Ok => "ok",
            SchemeStatus::Infeasible => "infeasible",
            SchemeStatus::IterationLimit => "iteration_limit",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemeResult {
    pub scheme: Scheme,
    /// Energy of `plan` over `dt`; NaN unless a solution was found.
    pub energy: f64,
    pub schedule: Option<Schedule>,
    pub dt: Option<TimeAllocation>,
    pub plan: Option<FrequencyPlan>,
    pub status: SchemeStatus,
    /// Decomposition iterations, or schedules evaluated.
    pub iterations: usize,
    pub ub: f64,
    pub lb: f64,
}

impl SchemeResult {
    fn from_solution(scn: &Scenario, scheme: Scheme, schedule: Schedule, sol: &PrimalSolution, iterations: usize) -> Self {
        let energy = eval_energy(&sol.f, &sol.dt, scn.params.server_energy_coef);
        Self {
            scheme,
            energy,
            schedule: Some(schedule),
            dt: Some(sol.dt.clone()),
            plan: Some(sol.f.clone()),
            status: SchemeStatus::Ok,
            iterations,
            ub: sol.energy,
            lb: f64::NAN,
        }
    }

    fn from_report(scn: &Scenario, scheme: Scheme, r: &SolveReport) -> Self {
        let mut out = Self::from_solution(scn, scheme, r.schedule.clone(), &r.solution, r.iterations);
        out.ub = r.ub;
        out.lb = r.lb;
        if r.status == GbdStatus::IterationLimit {
            out.status = SchemeStatus::IterationLimit;
        }
        out
    }

    fn infeasible(scheme: Scheme, iterations: usize) -> Self {
        Self {
            scheme,
            energy: f64::NAN,
            schedule: None,
            dt: None,
            plan: None,
            status: SchemeStatus::Infeasible,
            iterations,
            ub: f64::INFINITY,
            lb: f64::NAN,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status != SchemeStatus::Infeasible
    }
}

/// Fixed-schedule solver for a restricted frequency model. Infeasible
/// schedules are certified by a slack problem (last-slot computation for
/// `Sync`, unrestricted for `RowConstant`) when it has positive slack, and
/// cut individually otherwise.
#[derive(Debug, Clone)]
pub struct RestrictedPrimal {
    pub restriction: Restriction,
    pub ipm: IpmOptions,
    pub feas_tol: f64,
}

impl RestrictedPrimal {
    pub fn new(restriction: Restriction) -> Self {
        Self {
            restriction,
            ipm: IpmOptions::default(),
            feas_tol: 1e-6,
        }
    }

    pub fn solve(&self, scn: &Scenario, schedule: &Schedule) -> Result<PrimalSolution> {
        let r = convex::solve_restricted_oracle(scn, schedule, self.restriction, &self.ipm)?;
        let k = scn.num_devices();
        let kappa = scn.params.server_energy_coef;
        let cycles = scn.ordered_cycles(schedule);
        let dt = r.dt;
        let mut f = FrequencyPlan::zeros(k);
        let mut beta = vec![0.0; k];
        let mut omega = vec![0.0; k + 2];
        match self.restriction {
            Restriction::Sync => {
                let last = dt[k + 1];
                for n in 1..=k {
                    f.set(n, k + 1, cycles[n - 1] / last);
                    beta[n - 1] = 3.0 * kappa * (cycles[n - 1] / last).powi(2) + r.capacity[k + 1];
                }
                omega[k + 1] = r.capacity[k + 1];
            }
            Restriction::RowConstant => {
                for n in 1..=k {
                    let w: f64 = dt.dt[n + 1..].iter().sum();
                    let rate = cycles[n - 1] / w;
                    for m in n + 1..=k + 1 {
                        f.set(n, m, rate);
                    }
                    let pressure: f64 = (n + 1..=k + 1).map(|m| r.capacity[m]).sum();
                    beta[n - 1] = 3.0 * kappa * rate * rate + pressure / w;
                }
                for m in 2..=k + 1 {
                    if dt[m] > 0.0 {
                        omega[m] = r.capacity[m] / dt[m];
                    }
                }
            }
        }
        let x: SlotMatrix = f.map(|_, m, v| v * dt[m]);
        Ok(PrimalSolution {
            energy: r.energy,
            kkt_residual: r.solution.kkt_residual,
            dt,
            x,
            f,
            duals: JointDuals {
                rho: r.rho,
                beta,
                omega,
                xi: r.xi,
            },
            converged: true,
            iterations: r.solution.iterations,
            method: PrimalMethod::Oracle,
            trace: Vec::new(),
        })
    }
}

impl PrimalSolver for RestrictedPrimal {
    fn evaluate(&self, scn: &Scenario, schedule: &Schedule) -> Result<Evaluation> {
        match self.solve(scn, schedule) {
            Ok(sol) => Ok(Evaluation::Feasible(Box::new(sol))),
            Err(e) if e.is_infeasible() => {
                let feas = match self.restriction {
                    Restriction::Sync => convex::solve_sync_feasibility(scn, schedule, &self.ipm)?,
                    Restriction::RowConstant => convex::solve_feasibility(scn, schedule, &self.ipm)?,
                };
                let cert = (feas.objective > self.feas_tol).then(|| Box::new(feas));
                Ok(Evaluation::Infeasible(cert))
            }
            Err(e) => Err(e),
        }
    }
}

fn run_gbd(scn: &Scenario, scheme: Scheme, primal: &dyn PrimalSolver, opts: &GbdOptions) -> Result<SchemeResult> {
    match gbd::run(scn, primal, opts) {
        Ok(r) => Ok(SchemeResult::from_report(scn, scheme, &r)),
        Err(Error::AllSchedulesInfeasible) => Ok(SchemeResult::infeasible(scheme, 0)),
        Err(Error::IterationLimit { iterations, .. }) => {
            let mut r = SchemeResult::infeasible(scheme, iterations);
            r.status = SchemeStatus::IterationLimit;
            Ok(r)
        }
        Err(e) => Err(e),
    }
}

/// Joint scheduling, time and asynchronous frequency allocation.
pub fn solve_proposed(scn: &Scenario, primal: &dyn PrimalSolver, opts: &GbdOptions) -> Result<SchemeResult> {
    run_gbd(scn, Scheme::Proposed, primal, opts)
}

/// One constant frequency per task over its whole computing window, with
/// scheduling and time split optimized by the same decomposition.
pub fn solve_jsora(scn: &Scenario, opts: &GbdOptions) -> Result<SchemeResult> {
    run_gbd(scn, Scheme::Jsora, &RestrictedPrimal::new(Restriction::RowConstant), opts)
}

/// Computation starts only after every task is received.
pub fn solve_sync(scn: &Scenario, opts: &GbdOptions) -> Result<SchemeResult> {
    run_gbd(scn, Scheme::Sync, &RestrictedPrimal::new(Restriction::Sync), opts)
}

/// Seeded uniform schedule with optimal time and frequency allocation.
pub fn solve_random(scn: &Scenario, seed: u64, primal: &dyn PrimalSolver) -> Result<SchemeResult> {
    let schedule = Schedule::random(scn.num_devices(), &mut instance_rng(seed, 0x5eed));
    match primal.evaluate(scn, &schedule)? {
        Evaluation::Feasible(sol) => Ok(SchemeResult::from_solution(scn, Scheme::Random, schedule, &sol, 1)),
        Evaluation::Infeasible(_) => {
            let mut r = SchemeResult::infeasible(Scheme::Random, 1);
            r.schedule = Some(schedule);
            Ok(r)
        }
    }
}

/// All schedules in lexicographic order.
pub fn all_schedules(k: usize) -> Vec<Schedule> {
    let mut p: Vec<usize> = (0..k).collect();
    let mut out = Vec::new();
    loop {
        out.push(Schedule::new(p.clone()).expect("permutation"));
        if !next_permutation(&mut p) {
            return out;
        }
    }
}

/// Minimum over all `K!` schedules; ties go to the lexicographically
/// smallest schedule.
pub fn solve_exhaustive(scn: &Scenario, primal: &dyn PrimalSolver, cap: usize) -> Result<SchemeResult> {
    let k = scn.num_devices();
    if k > cap {
        return Err(Error::Refused(format!(
            "exhaustive search over {k}! schedules exceeds the cap K <= {cap}; use the decomposition or raise the cap"
        )));
    }
    let schedules = all_schedules(k);
    let evaluated: Vec<Option<(Schedule, PrimalSolution)>> = schedules
        .into_par_iter()
        .map(|s| match primal.evaluate(scn, &s)? {
            Evaluation::Feasible(sol) => Ok(Some((s, *sol))),
            Evaluation::Infeasible(_) => Ok(None),
        })
        .collect::<Result<_>>()?;
    let count = evaluated.len();
    let best = evaluated
        .into_iter()
        .flatten()
        .fold(None, |acc: Option<(Schedule, PrimalSolution)>, cand| match acc {
            Some(a) if a.1.energy <= cand.1.energy => Some(a),
            _ => Some(cand),
        });
    Ok(match best {
        Some((s, sol)) => SchemeResult::from_solution(scn, Scheme::Exhaustive, s, &sol, count),
        None => SchemeResult::infeasible(Scheme::Exhaustive, count),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbd::JointPrimal;
    use crate::scenario::{DeviceTask, PhysicalParams};
    use approx::assert_relative_eq;

    fn scenario(k: usize, f_max: f64) -> Scenario {
        let tasks = (0..k)
            .map(|i| DeviceTask::new(2e4 + 5e3 * i as f64, 800.0 + 100.0 * i as f64, 1.0, 2e-4 * (1.0 + 0.7 * i as f64)).unwrap())
            .collect();
        Scenario::new(1.0, f_max, PhysicalParams::default(), tasks).unwrap()
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("nope".parse::<Scheme>().is_err());
    }

    #[test]
    fn all_schedules_count() {
        assert_eq!(all_schedules(4).len(), 24);
        assert_eq!(all_schedules(1), vec![Schedule::identity(1)]);
    }

    #[test]
    fn sync_plan_uses_last_slot_only() {
        let scn = scenario(3, 1e9);
        let s = Schedule::identity(3);
        let sol = RestrictedPrimal::new(Restriction::Sync).solve(&scn, &s).unwrap();
        let cycles = scn.ordered_cycles(&s);
        for (n, m) in sol.f.indices() {
            if m <= 3 {
                assert_eq!(sol.f.at(n, m), 0.0);
            } else {
                assert_relative_eq!(sol.f.at(n, m) * sol.dt[4], cycles[n - 1], max_relative = 1e-12);
            }
        }
        assert_relative_eq!(eval_energy(&sol.f, &sol.dt, 1e-26), sol.energy, max_relative = 1e-8);
    }

    #[test]
    fn row_constant_plan_is_constant_per_row() {
        let scn = scenario(3, 1e9);
        let s = Schedule::identity(3);
        let sol = RestrictedPrimal::new(Restriction::RowConstant).solve(&scn, &s).unwrap();
        for n in 1..=3 {
            let first = sol.f.at(n, n + 1);
            for m in n + 1..=4 {
                assert_eq!(sol.f.at(n, m), first);
            }
        }
        assert_relative_eq!(eval_energy(&sol.f, &sol.dt, 1e-26), sol.energy, max_relative = 1e-8);
    }

    #[test]
    fn restricted_cuts_match_energy_at_source() {
        let scn = scenario(3, 1e9);
        for restriction in [Restriction::Sync, Restriction::RowConstant] {
            for s in all_schedules(3) {
                let sol = RestrictedPrimal::new(restriction).solve(&scn, &s).unwrap();
                let cut = gbd::build_optimality_cut(&scn, &s, &sol, 1);
                assert_relative_eq!(crate::master::eval_cut(&cut, &s), sol.energy, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn restricted_never_beats_joint() {
        let scn = scenario(3, 1e9);
        let joint = JointPrimal::oracle();
        for s in all_schedules(3) {
            let Evaluation::Feasible(j) = joint.evaluate(&scn, &s).unwrap() else { panic!() };
            for restriction in [Restriction::Sync, Restriction::RowConstant] {
                let r = RestrictedPrimal::new(restriction).solve(&scn, &s).unwrap();
                assert!(r.energy >= j.energy * (1.0 - 1e-7));
            }
        }
    }

    #[test]
    fn abundant_capacity_row_constant_equals_joint() {
        let scn = scenario(3, 1e12);
        let joint = JointPrimal::oracle();
        let s = Schedule::new(vec![1, 2, 0]).unwrap();
        let Evaluation::Feasible(j) = joint.evaluate(&scn, &s).unwrap() else { panic!() };
        let r = RestrictedPrimal::new(Restriction::RowConstant).solve(&scn, &s).unwrap();
        assert_relative_eq!(r.energy, j.energy, max_relative = 1e-6);
    }

    #[test]
    fn exhaustive_is_a_lower_bound_and_cap_is_enforced() {
        let scn = scenario(3, 1e9);
        let joint = JointPrimal::oracle();
        let ex = solve_exhaustive(&scn, &joint, 8).unwrap();
        let opts = GbdOptions::default();
        let p = solve_proposed(&scn, &joint, &opts).unwrap();
        let r = solve_random(&scn, 7, &joint).unwrap();
        assert!(ex.energy <= p.energy * (1.0 + 1e-9));
        assert!(ex.energy <= r.energy * (1.0 + 1e-9));
        assert!(matches!(solve_exhaustive(&scenario(4, 1e9), &joint, 3), Err(Error::Refused(_))));
    }

    #[test]
    fn symmetric_devices_tie_to_identity() {
        let task = DeviceTask::new(3e4, 1e3, 1.0, 3e-4).unwrap();
        let scn = Scenario::new(1.0, 1e9, PhysicalParams::default(), vec![task; 2]).unwrap();
        let ex = solve_exhaustive(&scn, &JointPrimal::oracle(), 8).unwrap();
        assert_eq!(ex.schedule, Some(Schedule::identity(2)));
    }

    #[test]
    fn random_is_seeded() {
        let scn = scenario(4, 1e9);
        let joint = JointPrimal::oracle();
        let a = solve_random(&scn, 11, &joint).unwrap();
        let b = solve_random(&scn, 11, &joint).unwrap();
        assert_eq!(a.schedule, b.schedule);
        assert_eq!(a.energy.to_bits(), b.energy.to_bits());
    }

    #[test]
    fn single_device_schemes_agree() {
        let scn = scenario(1, 1e9);
        let joint = JointPrimal::oracle();
        let opts = GbdOptions::default();
        let p = solve_proposed(&scn, &joint, &opts).unwrap();
        let j = solve_jsora(&scn, &opts).unwrap();
        let r = solve_random(&scn, 3, &joint).unwrap();
        assert_relative_eq!(p.energy, j.energy, max_relative = 1e-6);
        assert_relative_eq!(p.energy, r.energy, max_relative = 1e-12);
    }
}
