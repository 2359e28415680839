use amec_bench::rows::{aggregate, fmt_f64, read_rows, write_csv, ResultRow, RowStatus};
use amec_bench::stats::sign_test;
use amec_core::baselines::Scheme;
use proptest::prelude::*;

fn row(seed: u64, axis_value: f64, scheme: Scheme, energy_j: f64, ok: bool) -> ResultRow {
    ResultRow {
        scenario_id: format!("K=3/seed={seed}"),
        axis_value,
        seed,
        scheme,
        energy_j: if ok { energy_j } else { f64::NAN },
        status: if ok { RowStatus::Ok } else { RowStatus::Infeasible },
        iterations: 2,
        ub_j: energy_j,
        lb_j: 0.5 * energy_j,
        wall_ms: 1.5,
    }
}

proptest! {
    #[test]
    fn float_format_round_trips(v in prop::num::f64::ANY) {
        let back: f64 = match fmt_f64(v).as_str() {
            "NaN" => f64::NAN,
            "inf" => f64::INFINITY,
            "-inf" => f64::NEG_INFINITY,
            s => s.parse().unwrap(),
        };
        prop_assert!(back.to_bits() == v.to_bits() || (v.is_nan() && back.is_nan()));
    }

    #[test]
    fn csv_round_trip_and_aggregates(cells in prop::collection::vec((0u8..3, 1e-4..1.0f64, any::<bool>()), 1..40)) {
        let rows: Vec<ResultRow> = cells
            .iter()
            .enumerate()
            .map(|(i, &(v, e, ok))| row(i as u64, v as f64, if i % 2 == 0 { Scheme::Proposed } else { Scheme::Sync }, e, ok))
            .collect();
        let aggs = aggregate(&rows);
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows, &aggs).unwrap();
        let back = read_rows(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            prop_assert_eq!(a.seed, b.seed);
            prop_assert_eq!(a.status, b.status);
            prop_assert!(a.energy_j.to_bits() == b.energy_j.to_bits() || (a.energy_j.is_nan() && b.energy_j.is_nan()));
        }
        for agg in &aggs {
            let sel: Vec<f64> = rows
                .iter()
                .filter(|r| r.axis_value == agg.axis_value && r.scheme == agg.scheme && r.is_ok())
                .map(|r| r.energy_j)
                .collect();
            prop_assert_eq!(sel.len(), agg.count);
            if !sel.is_empty() {
                let mean = sel.iter().sum::<f64>() / sel.len() as f64;
                prop_assert!((mean - agg.mean).abs() <= 1e-12 * mean.abs().max(1.0));
            }
        }
    }

    #[test]
    fn sign_test_is_symmetric(diffs in prop::collection::vec(-1.0..1.0f64, 1..60)) {
        let up = sign_test(&diffs);
        let down = sign_test(&diffs.iter().map(|d| -d).collect::<Vec<_>>());
        prop_assert_eq!(up.n, down.n);
        prop_assert_eq!(up.positives + down.positives, up.n);
        prop_assert!(up.p_value > 0.0 && up.p_value <= 1.0);
    }
}
