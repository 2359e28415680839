//! Timing of the closed-form frequency allocator against the interior-point
//! reference on identical instances, bucketed by transition slot.

use std::io::Write;
use std::time::Instant;

use amec_core::convex::{solve_freq_oracle, IpmOptions};
use amec_core::freq_alloc::{allocate_frequencies, required_fmax, transition_point, transition_thresholds, AllocOptions, TransitionVerdict};
use amec_core::scenario::{generate_scenario, Scenario, ScenarioConfig, Schedule, TimeAllocation};
use amec_core::time_alloc::{solve_primal, PrimalOptions, PrimalOutcome};
use serde::Serialize;

use crate::error::Result;
use crate::rows::fmt_f64;
use crate::stats::median;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub seed: u64,
    /// Transition slot, `K + 2` when capacity never binds.
    pub transition: usize,
    pub f_max: f64,
    pub alloc_us: f64,
    pub oracle_us: f64,
    pub ratio: f64,
    pub energy_rel_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingSummary {
    pub transition: usize,
    pub count: usize,
    pub median_alloc_us: f64,
    pub median_oracle_us: f64,
    pub median_ratio: f64,
}

/// One capacity per reachable transition slot: the midpoint of each
/// threshold interval above the feasibility limit, plus one capacity with
/// no transition.
pub fn transition_probes(cycles: &[f64], dt: &TimeAllocation) -> amec_core::Result<Vec<(f64, usize)>> {
    let k = cycles.len();
    let thr = transition_thresholds(cycles, dt)?;
    let required = required_fmax(cycles, dt)?;
    let mut out = Vec::new();
    for i in 3..=k + 1 {
        let lo = thr[i - 1].max(required);
        let hi = thr[i];
        if lo < hi {
            let f = lo + 0.5 * (hi - lo);
            if let TransitionVerdict::TransitionAt(j) = transition_point(cycles, dt, f)? {
                out.push((f, j));
            }
        }
    }
    out.push((1.25 * thr[k + 1].max(required), k + 2));
    Ok(out)
}

fn median_time_us(reps: usize, mut f: impl FnMut() -> amec_core::Result<()>) -> amec_core::Result<f64> {
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps.max(1) {
        let t = Instant::now();
        f()?;
        times.push(t.elapsed().as_secs_f64() * 1e6);
    }
    Ok(median(&times))
}

/// Times both solvers at `f_max`, taking the median of `reps` runs each.
pub fn time_pair(cycles: &[f64], dt: &TimeAllocation, f_max: f64, kappa: f64, reps: usize) -> amec_core::Result<(f64, f64, f64)> {
    let alloc_opts = AllocOptions::default();
    let ipm = IpmOptions::default();
    let a = allocate_frequencies(cycles, dt, f_max, kappa, &alloc_opts)?;
    let o = solve_freq_oracle(cycles, dt, f_max, kappa, &ipm)?;
    let alloc_us = median_time_us(reps, || allocate_frequencies(cycles, dt, f_max, kappa, &alloc_opts).map(|_| ()))?;
    let oracle_us = median_time_us(reps.div_ceil(4).max(3), || solve_freq_oracle(cycles, dt, f_max, kappa, &ipm).map(|_| ()))?;
    Ok((alloc_us, oracle_us, (a.energy - o.energy).abs() / o.energy))
}

/// Slot durations of the joint optimum for the identity schedule, or `None`
/// when that schedule is infeasible.
pub fn reference_durations(scn: &Scenario) -> amec_core::Result<Option<TimeAllocation>> {
    let opts = PrimalOptions {
        oracle_only: true,
        ..PrimalOptions::default()
    };
    Ok(match solve_primal(scn, &Schedule::identity(scn.num_devices()), &opts)? {
        PrimalOutcome::Feasible(sol) => Some(sol.dt),
        PrimalOutcome::Infeasible(_) => None,
    })
}

/// Runs sequentially so timings do not compete for cores.
pub fn run_complexity(cfg: &ScenarioConfig, seeds: &[u64], reps: usize) -> Result<(Vec<TimingRow>, Vec<TimingSummary>)> {
    let mut rows = Vec::new();
    for &seed in seeds {
        let scn = generate_scenario(cfg, seed)?;
        let Some(dt) = reference_durations(&scn)? else {
            continue;
        };
        let cycles = scn.ordered_cycles(&Schedule::identity(scn.num_devices()));
        for (f_max, transition) in transition_probes(&cycles, &dt)? {
            let (alloc_us, oracle_us, energy_rel_diff) = time_pair(&cycles, &dt, f_max, scn.params.server_energy_coef, reps)?;
            rows.push(TimingRow {
                seed,
                transition,
                f_max,
                alloc_us,
                oracle_us,
                ratio: oracle_us / alloc_us,
                energy_rel_diff,
            });
        }
    }
    let summary = summarize(&rows);
    Ok((rows, summary))
}

pub fn summarize(rows: &[TimingRow]) -> Vec<TimingSummary> {
    let mut slots: Vec<usize> = rows.iter().map(|r| r.transition).collect();
    slots.sort_unstable();
    slots.dedup();
    slots
        .into_iter()
        .map(|t| {
            let sel: Vec<&TimingRow> = rows.iter().filter(|r| r.transition == t).collect();
            let pick = |f: fn(&TimingRow) -> f64| median(&sel.iter().map(|r| f(r)).collect::<Vec<_>>());
            TimingSummary {
                transition: t,
                count: sel.len(),
                median_alloc_us: pick(|r| r.alloc_us),
                median_oracle_us: pick(|r| r.oracle_us),
                median_ratio: pick(|r| r.ratio),
            }
        })
        .collect()
}

/// Raw rows, then one `median` row per transition slot.
pub fn write_timing_csv<W: Write>(out: W, rows: &[TimingRow], summary: &[TimingSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "seed", "transition", "F_max_Hz", "alloc_us", "oracle_us", "ratio", "energy_rel_diff"])?;
    for r in rows {
        w.write_record([
            "raw".to_string(),
            r.seed.to_string(),
            r.transition.to_string(),
            fmt_f64(r.f_max),
            format!("{:.3}", r.alloc_us),
            format!("{:.3}", r.oracle_us),
            format!("{:.3}", r.ratio),
            fmt_f64(r.energy_rel_diff),
        ])?;
    }
    for s in summary {
        w.write_record([
            "median".to_string(),
            String::new(),
            s.transition.to_string(),
            String::new(),
            format!("{:.3}", s.median_alloc_us),
            format!("{:.3}", s.median_oracle_us),
            format!("{:.3}", s.median_ratio),
            String::new(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
