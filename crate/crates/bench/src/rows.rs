//! Result rows and their CSV encoding.
//!
//! Column order: `scenario_id, axis_value, seed, scheme, energy_J, status,
//! iterations, ub_J, lb_J, wall_ms`. Raw rows come first in (axis value,
//! seed, scheme) order, followed by one `mean` and one `std` row per (axis
//! value, scheme) computed over the `ok` rows. Floats carry 17 significant
//! digits so every value round-trips exactly.

use std::io::Write;

use amec_core::baselines::{Scheme, SchemeResult, SchemeStatus};
use serde::{Deserialize, Serialize};
use statrs::statistics::Statistics;

use crate::error::{BenchError, Result};

pub const COLUMNS: [&str; 10] = [
    "scenario_id",
    "axis_value",
    "seed",
    "scheme",
    "energy_J",
    "status",
    "iterations",
    "ub_J",
    "lb_J",
    "wall_ms",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowStatus {
    Ok,
    Infeasible,
    IterationLimit,
    /// The solver returned an error; the sweep moved on.
    Error,
}

impl RowStatus {
    pub fn name(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Infeasible => "infeasible",
            RowStatus::IterationLimit => "iteration_limit",
            RowStatus::Error => "error",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [RowStatus::Ok, RowStatus::Infeasible, RowStatus::IterationLimit, RowStatus::Error]
            .into_iter()
            .find(|x| x.name() == s)
    }
}

impl From<SchemeStatus> for RowStatus {
    fn from(s: SchemeStatus) -> Self {
        match s {
            SchemeStatus::Ok => RowStatus::Ok,
            SchemeStatus::Infeasible => RowStatus::Infeasible,
            SchemeStatus::IterationLimit => RowStatus::IterationLimit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario_id: String,
    pub axis_value: f64,
    pub seed: u64,
    pub scheme: Scheme,
    pub energy_j: f64,
    pub status: RowStatus,
    pub iterations: usize,
    pub ub_j: f64,
    pub lb_j: f64,
    pub wall_ms: f64,
}

impl ResultRow {
    pub fn from_result(scenario_id: String, axis_value: f64, seed: u64, r: &SchemeResult, wall_ms: f64) -> Self {
        Self {
            scenario_id,
            axis_value,
            seed,
            scheme: r.scheme,
            energy_j: r.energy,
            status: r.status.into(),
            iterations: r.iterations,
            ub_j: r.ub,
            lb_j: r.lb,
            wall_ms,
        }
    }

    pub fn failed(scenario_id: String, axis_value: f64, seed: u64, scheme: Scheme, wall_ms: f64) -> Self {
        Self {
            scenario_id,
            axis_value,
            seed,
            scheme,
            energy_j: f64::NAN,
            status: RowStatus::Error,
            iterations: 0,
            ub_j: f64::NAN,
            lb_j: f64::NAN,
            wall_ms,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == RowStatus::Ok
    }

    fn record(&self) -> [String; 10] {
        [
            self.scenario_id.clone(),
            fmt_f64(self.axis_value),
            self.seed.to_string(),
            self.scheme.name().to_string(),
            fmt_f64(self.energy_j),
            self.status.name().to_string(),
            self.iterations.to_string(),
            fmt_f64(self.ub_j),
            fmt_f64(self.lb_j),
            format!("{:.3}", self.wall_ms),
        ]
    }
}

/// Mean and sample standard deviation of `ok` energies for one
/// (axis value, scheme) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub axis_value: f64,
    pub scheme: Scheme,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    match s {
        "" => None,
        "NaN" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

/// Aggregates in first-appearance order of (axis value, scheme).
pub fn aggregate(rows: &[ResultRow]) -> Vec<Aggregate> {
    let mut keys: Vec<(f64, Scheme)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|&(v, s)| v.to_bits() == r.axis_value.to_bits() && s == r.scheme) {
            keys.push((r.axis_value, r.scheme));
        }
    }
    keys.into_iter()
        .map(|(v, s)| {
            let energies: Vec<f64> = rows
                .iter()
                .filter(|r| r.axis_value.to_bits() == v.to_bits() && r.scheme == s && r.is_ok())
                .map(|r| r.energy_j)
                .collect();
            let count = energies.len();
            let (mean, std) = match count {
                0 => (f64::NAN, f64::NAN),
                1 => (energies[0], 0.0),
                _ => ((&energies).mean(), (&energies).std_dev()),
            };
            Aggregate {
                axis_value: v,
                scheme: s,
                count,
                mean,
                std,
            }
        })
        .collect()
}

pub fn write_csv<W: Write>(out: W, rows: &[ResultRow], aggregates: &[Aggregate]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    for a in aggregates {
        for (label, value) in [("mean", a.mean), ("std", a.std)] {
            w.write_record([
                label.to_string(),
                fmt_f64(a.axis_value),
                String::new(),
                a.scheme.name().to_string(),
                fmt_f64(value),
                "aggregate".to_string(),
                a.count.to_string(),
                String::new(),
                String::new(),
                String::new(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the raw rows back, skipping the aggregate footer.
pub fn read_rows<R: std::io::Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let bad = |line: usize, what: &str| BenchError::config("csv", format!("record {line}: bad {what}"));
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        if rec.get(5) == Some("aggregate") {
            continue;
        }
        let field = |j: usize| rec.get(j).unwrap_or("");
        out.push(ResultRow {
            scenario_id: field(0).to_string(),
            axis_value: parse_f64(field(1)).ok_or_else(|| bad(i, "axis_value"))?,
            seed: field(2).parse().map_err(|_| bad(i, "seed"))?,
            scheme: field(3).parse().map_err(|_| bad(i, "scheme"))?,
            energy_j: parse_f64(field(4)).ok_or_else(|| bad(i, "energy_J"))?,
            status: RowStatus::parse(field(5)).ok_or_else(|| bad(i, "status"))?,
            iterations: field(6).parse().map_err(|_| bad(i, "iterations"))?,
            ub_j: parse_f64(field(7)).ok_or_else(|| bad(i, "ub_J"))?,
            lb_j: parse_f64(field(8)).ok_or_else(|| bad(i, "lb_J"))?,
            wall_ms: parse_f64(field(9)).ok_or_else(|| bad(i, "wall_ms"))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: f64, seed: u64, scheme: Scheme, e: f64, status: RowStatus) -> ResultRow {
        ResultRow {
            scenario_id: format!("x{seed}"),
            axis_value: v,
            seed,
            scheme,
            energy_j: e,
            status,
            iterations: 3,
            ub_j: e,
            lb_j: 0.5 * e,
            wall_ms: 1.25,
        }
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, f64::MIN_POSITIVE, 123456789.12345679] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert!(parse_f64(&fmt_f64(f64::NAN)).unwrap().is_nan());
    }

    #[test]
    fn aggregates_skip_failed_rows() {
        let rows = vec![
            row(3.0, 0, Scheme::Proposed, 1.0, RowStatus::Ok),
            row(3.0, 1, Scheme::Proposed, 3.0, RowStatus::Ok),
            row(3.0, 2, Scheme::Proposed, f64::NAN, RowStatus::Infeasible),
            row(3.0, 0, Scheme::Sync, 5.0, RowStatus::Ok),
        ];
        let agg = aggregate(&rows);
        assert_eq!(agg.len(), 2);
        assert_eq!(agg[0].count, 2);
        assert_eq!(agg[0].mean, 2.0);
        assert!((agg[0].std - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(agg[1].std, 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            row(4.0, 7, Scheme::Jsora, 0.012345678901234567, RowStatus::Ok),
            row(4.0, 8, Scheme::Jsora, f64::NAN, RowStatus::Error),
        ];
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows, &aggregate(&rows)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("scenario_id,axis_value,seed,scheme,energy_J,status,iterations,ub_J,lb_J,wall_ms\n"));
        assert!(text.contains("\nmean,"));
        let back = read_rows(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0], rows[0]);
        assert_eq!(back[1].status, RowStatus::Error);
    }
}
