//! Command-line harness around `amec-core`: seeded sweeps, scheme
//! comparisons, invariant validation and solver timing, all emitting CSV.

pub mod complexity;
pub mod error;
pub mod rows;
pub mod stats;
pub mod sweep;
pub mod validate;

use amec_core::freq_alloc::{required_fmax, FrequencyPlan};
use amec_core::gbd::{Diagnostics, GbdStatus, SolveReport, TraceRow};
use amec_core::scenario::{Scenario, Schedule, TimeAllocation};
use amec_core::time_alloc::{solve_primal, PrimalOptions, PrimalOutcome};
use serde::Serialize;

pub use error::{BenchError, Result};

/// Serializable part of a decomposition run.
#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub seed: u64,
    pub status: GbdStatus,
    pub energy_j: f64,
    pub ub_j: f64,
    pub lb_j: f64,
    pub iterations: usize,
    pub schedule: Schedule,
    pub dt: TimeAllocation,
    pub frequencies: FrequencyPlan,
    pub trace: Vec<TraceRow>,
    pub diagnostics: Diagnostics,
}

impl SolveSummary {
    pub fn new(scn: &Scenario, r: &SolveReport) -> Self {
        Self {
            seed: scn.seed,
            status: r.status,
            energy_j: r.energy,
            ub_j: r.ub,
            lb_j: r.lb,
            iterations: r.iterations,
            schedule: r.schedule.clone(),
            dt: r.solution.dt.clone(),
            frequencies: r.solution.f.clone(),
            trace: r.trace.clone(),
            diagnostics: r.diagnostics.clone(),
        }
    }

    /// Fixed-width text form; contains no timing, so it is byte-stable.
    pub fn render(&self) -> String {
        let mut s = String::new();
        s += &format!("status      {:?}\n", self.status);
        s += &format!("energy_J    {:.9e}\n", self.energy_j);
        s += &format!("schedule    {}\n", self.schedule);
        s += &format!("bounds      ub {:.9e}  lb {:.9e}\n", self.ub_j, self.lb_j);
        s += &format!("iterations  {}\n", self.iterations);
        s += "slot durations (s):";
        for d in &self.dt.dt {
            s += &format!(" {d:.6e}");
        }
        s += "\n\n iter  schedule             cut          energy_J          ub_J              lb_J\n";
        for t in &self.trace {
            let energy = t.energy.map_or("-".to_string(), |e| format!("{e:.9e}"));
            s += &format!(
                "{:>5}  {:<20} {:<12} {:<17} {:<17.9e} {:.9e}\n",
                t.iteration,
                t.schedule.to_string(),
                format!("{:?}", t.cut),
                energy,
                t.ub,
                t.lb
            );
        }
        s
    }
}

/// Server capacities bracketing feasibility of an instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityHint {
    /// `Σ F_k / T`: no schedule can work below this.
    pub lower: f64,
    /// Capacity that makes the identity schedule feasible, when its
    /// energy constraints can be met at all.
    pub sufficient: Option<f64>,
}

pub fn capacity_hint(scn: &Scenario) -> amec_core::Result<CapacityHint> {
    let total: f64 = scn.tasks.iter().map(|t| t.cycles).sum();
    let lower = total / scn.deadline;
    let identity = Schedule::identity(scn.num_devices());
    let relaxed = scn.with_f_max(lower * 1e6);
    let opts = PrimalOptions {
        oracle_only: true,
        ..PrimalOptions::default()
    };
    let sufficient = match solve_primal(&relaxed, &identity, &opts)? {
        PrimalOutcome::Feasible(sol) => Some(required_fmax(&scn.ordered_cycles(&identity), &sol.dt)?),
        PrimalOutcome::Infeasible(_) => None,
    };
    Ok(CapacityHint { lower, sufficient })
}

#[cfg(test)]
mod tests {
    use super::*;
    use amec_core::scenario::{DeviceTask, PhysicalParams};

    #[test]
    fn hint_brackets_total_load() {
        let tasks = (0..3)
            .map(|i| DeviceTask::new(2e4, 1000.0, 1.0, 3e-4 * (1.0 + i as f64)).unwrap())
            .collect();
        let scn = Scenario::new(1.0, 1e9, PhysicalParams::default(), tasks).unwrap();
        let h = capacity_hint(&scn).unwrap();
        assert!((h.lower - 6e7).abs() < 1e-6);
        let s = h.sufficient.unwrap();
        assert!(s >= h.lower);
    }
}
