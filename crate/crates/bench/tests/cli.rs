use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use amec_bench::rows::{aggregate, read_rows};
use amec_core::scenario::ScenarioConfig;
use tempfile::TempDir;

fn amec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amec"))
        .args(args)
        .env_remove("AMEC_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write_config(dir: &Path, cfg: &ScenarioConfig) -> String {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

/// Drops the trailing `wall_ms` field of every record.
fn without_timing(csv: &str) -> Vec<String> {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect()
}

#[test]
fn solve_output_is_byte_stable() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &ScenarioConfig::with_k(4));
    let a = amec(&["solve", "--config", &cfg, "--seed", "1"]);
    let b = amec(&["solve", "--config", &cfg, "--seed", "1"]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    assert!(String::from_utf8_lossy(&a.stdout).contains("energy_J"));
}

#[test]
fn infeasible_capacity_exits_2_with_hint() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        &ScenarioConfig {
            f_max: 1e3,
            ..ScenarioConfig::with_k(3)
        },
    );
    let out = amec(&["solve", "--config", &cfg]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("needs at least"));
}

#[test]
fn config_errors_exit_4() {
    assert_eq!(code(&amec(&["solve", "--eps-gbd", "-1"])), 4);
    assert_eq!(code(&amec(&["solve", "--no-such-flag"])), 4);
    assert_eq!(code(&amec(&["sweep", "--axis", "Q", "--values", "1"])), 4);
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"K": 3, "unknown": 1}"#).unwrap();
    assert_eq!(code(&amec(&["solve", "--config", bad.to_str().unwrap()])), 4);
}

#[test]
fn sweep_csv_is_reproducible_and_aggregates_match_rows() {
    let dir = TempDir::new().unwrap();
    let paths = [dir.path().join("a.csv"), dir.path().join("b.csv")];
    for p in &paths {
        let out = amec(&[
            "sweep", "--axis", "K", "--values", "2..3", "--seeds", "2", "--schemes", "Proposed,Sync", "--out",
            p.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = fs::read_to_string(&paths[0]).unwrap();
    let b = fs::read_to_string(&paths[1]).unwrap();
    assert_eq!(without_timing(&a), without_timing(&b));

    let rows = read_rows(a.as_bytes()).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 2);
    let footer: Vec<&str> = a.lines().filter(|l| l.contains(",aggregate,")).collect();
    let aggs = aggregate(&rows);
    assert_eq!(footer.len(), 2 * aggs.len());
    for (agg, pair) in aggs.iter().zip(footer.chunks(2)) {
        let mean: f64 = pair[0].split(',').nth(4).unwrap().parse().unwrap();
        if agg.count > 0 {
            assert_eq!(mean.to_bits(), agg.mean.to_bits());
        }
    }
}

#[test]
fn validate_failure_replays() {
    let dir = TempDir::new().unwrap();
    let case = dir.path().join("failure.json");
    let case = case.to_str().unwrap();
    let out = amec(&["validate", "--instances", "3", "--k-max", "3", "--perturb-duals", "--out", case]);
    assert_eq!(code(&out), 5, "{}", String::from_utf8_lossy(&out.stderr));
    let replay = amec(&["validate", "--replay", case]);
    assert_eq!(code(&replay), 5);
    assert!(String::from_utf8_lossy(&replay.stdout).contains("oracle_sandwich"));
}

#[test]
fn clean_validate_passes() {
    let out = amec(&["validate", "--instances", "4", "--k-max", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
}
