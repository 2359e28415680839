//! Seeded scheme comparisons over one scenario axis.

use std::str::FromStr;
use std::time::Instant;

use amec_core::baselines::{self, Scheme, SchemeResult};
use amec_core::gbd::{GbdOptions, JointPrimal};
use amec_core::scenario::{generate_scenario, Scenario, ScenarioConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::rows::{aggregate, Aggregate, ResultRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    K,
    T,
    Fmax,
    Amin,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::K => "K",
            Axis::T => "T",
            Axis::Fmax => "Fmax",
            Axis::Amin => "Amin",
        }
    }
}

impl FromStr for Axis {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        [Axis::K, Axis::T, Axis::Fmax, Axis::Amin]
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| BenchError::config("axis", format!("expected K, T, Fmax or Amin, got {s:?}")))
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PrimalKind {
    /// Joint interior-point solve per schedule.
    #[default]
    Joint,
    /// Alternating time/frequency updates, certified against the joint solve.
    Bcd,
}

impl PrimalKind {
    pub fn solver(self) -> JointPrimal {
        match self {
            PrimalKind::Joint => JointPrimal::oracle(),
            PrimalKind::Bcd => JointPrimal::alternating(),
        }
    }
}

impl FromStr for PrimalKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "joint" => Ok(PrimalKind::Joint),
            "bcd" => Ok(PrimalKind::Bcd),
            _ => Err(BenchError::config("primal", format!("expected joint or bcd, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub gbd: GbdOptions,
    pub primal: PrimalKind,
    pub exhaustive_cap: usize,
}

impl RunOptions {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            gbd: GbdOptions {
                eps_gbd: cfg.tolerances.eps_gbd,
                max_iter: cfg.tolerances.max_iter_gbd,
                ..GbdOptions::default()
            },
            primal: PrimalKind::Joint,
            exhaustive_cap: cfg.tolerances.exhaustive_cap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub schemes: Vec<Scheme>,
}

impl SweepSpec {
    /// Checks the spec against `base` and returns the per-value configs.
    pub fn configs(&self, base: &ScenarioConfig, exhaustive_cap: usize) -> Result<Vec<ScenarioConfig>> {
        if self.values.is_empty() {
            return Err(BenchError::config("values", "at least one value is required"));
        }
        if self.seeds.is_empty() {
            return Err(BenchError::config("seeds", "at least one seed is required"));
        }
        if self.schemes.is_empty() {
            return Err(BenchError::config("schemes", "at least one scheme is required"));
        }
        let cfgs = self
            .values
            .iter()
            .map(|&v| apply_axis(base, self.axis, v))
            .collect::<Result<Vec<_>>>()?;
        if self.schemes.contains(&Scheme::Exhaustive) {
            if let Some(c) = cfgs.iter().find(|c| c.k > exhaustive_cap) {
                return Err(BenchError::config(
                    "schemes",
                    format!("Exhaustive needs K <= {exhaustive_cap}, got K = {}", c.k),
                ));
            }
        }
        Ok(cfgs)
    }
}

/// `base` with one axis set to `value`. `Amin` keeps the mean task size of
/// `base` and sets the range to `[value, 2·mean − value]`.
pub fn apply_axis(base: &ScenarioConfig, axis: Axis, value: f64) -> Result<ScenarioConfig> {
    let mut cfg = base.clone();
    let bad = |reason: String| BenchError::config("values", reason);
    match axis {
        Axis::K => {
            if !(value >= 1.0 && value.fract() == 0.0 && value <= 64.0) {
                return Err(bad(format!("K must be an integer in 1..=64, got {value}")));
            }
            cfg.k = value as usize;
        }
        Axis::T => cfg.deadline = value,
        Axis::Fmax => cfg.f_max = value,
        Axis::Amin => {
            let mean = 0.5 * (base.a_bits_range[0] + base.a_bits_range[1]);
            if !(value > 0.0 && value <= mean) {
                return Err(bad(format!("A_min must lie in (0, {mean}], got {value}")));
            }
            cfg.a_bits_range = [value, 2.0 * mean - value];
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one scheme on one instance. `seed` drives the random schedule.
pub fn run_scheme(scn: &Scenario, scheme: Scheme, seed: u64, opts: &RunOptions) -> amec_core::Result<SchemeResult> {
    let primal = opts.primal.solver();
    match scheme {
        Scheme::Proposed => baselines::solve_proposed(scn, &primal, &opts.gbd),
        Scheme::Jsora => baselines::solve_jsora(scn, &opts.gbd),
        Scheme::Sync => baselines::solve_sync(scn, &opts.gbd),
        Scheme::Random => baselines::solve_random(scn, seed, &primal),
        Scheme::Exhaustive => baselines::solve_exhaustive(scn, &primal, opts.exhaustive_cap),
    }
}

pub fn scenario_id(axis: Axis, value: f64, seed: u64) -> String {
    format!("{axis}={value}/seed={seed}")
}

/// One row per scheme for `(cfg, seed)`; solver errors become `error` rows.
pub fn run_instance(
    cfg: &ScenarioConfig,
    axis: Axis,
    value: f64,
    seed: u64,
    schemes: &[Scheme],
    opts: &RunOptions,
) -> Result<Vec<ResultRow>> {
    let scn = generate_scenario(cfg, seed)?;
    let id = scenario_id(axis, value, seed);
    Ok(schemes
        .iter()
        .map(|&scheme| {
            let start = Instant::now();
            let out = run_scheme(&scn, scheme, seed, opts);
            let ms = start.elapsed().as_secs_f64() * 1e3;
            match out {
                Ok(r) => ResultRow::from_result(id.clone(), value, seed, &r, ms),
                Err(_) => ResultRow::failed(id.clone(), value, seed, scheme, ms),
            }
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    pub aggregates: Vec<Aggregate>,
}

/// Instances run on the current rayon pool; rows come back in
/// (axis value, seed, scheme) order.
pub fn run_sweep(base: &ScenarioConfig, spec: &SweepSpec, opts: &RunOptions) -> Result<SweepOutput> {
    let cfgs = spec.configs(base, opts.exhaustive_cap)?;
    let jobs: Vec<(usize, u64)> = (0..cfgs.len())
        .flat_map(|i| spec.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let chunks = jobs
        .par_iter()
        .map(|&(i, seed)| run_instance(&cfgs[i], spec.axis, spec.values[i], seed, &spec.schemes, opts))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<ResultRow> = chunks.into_iter().flatten().collect();
    let aggregates = aggregate(&rows);
    Ok(SweepOutput { rows, aggregates })
}

/// Parses `"3,4,5"` or a range `"3..6"` (inclusive).
pub fn parse_values(s: &str) -> Result<Vec<f64>> {
    let bad = || BenchError::config("values", format!("cannot parse {s:?}"));
    if let Some((a, b)) = s.split_once("..") {
        let a: i64 = a.trim().parse().map_err(|_| bad())?;
        let b: i64 = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).map(|v| v as f64).collect());
    }
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
        .collect()
}

pub fn parse_schemes(s: &str) -> Result<Vec<Scheme>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Scheme::ALL.to_vec());
    }
    Ok(s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(Scheme::from_str)
        .collect::<amec_core::Result<_>>()?)
}
