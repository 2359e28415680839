use amec_core::baselines::{solve_exhaustive, solve_proposed, solve_random};
use amec_core::gbd::{self, GbdOptions, JointPrimal};
use amec_core::scenario::{generate_scenario, parse_config, Schedule, ScenarioConfig};
use proptest::prelude::*;

fn first_feasible(k: usize) -> (amec_core::scenario::Scenario, gbd::SolveReport) {
    let cfg = ScenarioConfig::with_k(k);
    (0..50)
        .find_map(|seed| {
            let scn = generate_scenario(&cfg, seed).unwrap();
            gbd::run(&scn, &JointPrimal::oracle(), &GbdOptions::default()).ok().map(|r| (scn, r))
        })
        .expect("a feasible seed among the first 50")
}

#[test]
fn scenario_generation_is_deterministic() {
    let cfg = ScenarioConfig::with_k(6);
    let a = serde_json::to_string(&generate_scenario(&cfg, 11).unwrap()).unwrap();
    let b = serde_json::to_string(&generate_scenario(&cfg, 11).unwrap()).unwrap();
    let c = serde_json::to_string(&generate_scenario(&cfg, 12).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn config_round_trips_through_json() {
    let cfg = ScenarioConfig::with_k(7);
    let back = parse_config(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(serde_json::to_value(&back).unwrap(), serde_json::to_value(&cfg).unwrap());
}

#[test]
fn solution_respects_frame_and_energy_identities() {
    let (scn, r) = first_feasible(4);
    let sol = &r.solution;
    assert!((sol.dt.total() - scn.deadline).abs() <= 1e-6 * scn.deadline);
    assert!(sol.dt.dt.iter().all(|&d| d >= 0.0));
    let mut order = r.schedule.order().to_vec();
    order.sort_unstable();
    assert_eq!(order, (0..4).collect::<Vec<_>>());
    assert!(r.energy.is_finite() && r.energy > 0.0);
    assert!(r.ub >= r.energy * (1.0 - 1e-9));
}

#[test]
fn enumeration_is_a_floor_for_other_schedules() {
    let (scn, _) = first_feasible(3);
    let primal = JointPrimal::oracle();
    let best = solve_exhaustive(&scn, &primal, 5).unwrap();
    let proposed = solve_proposed(&scn, &primal, &GbdOptions::default()).unwrap();
    let random = solve_random(&scn, 7, &primal).unwrap();
    assert!(best.energy <= proposed.energy * (1.0 + 1e-6));
    if random.is_ok() {
        assert!(best.energy <= random.energy * (1.0 + 1e-6));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn schedule_slots_invert_devices(perm in Just((0..7).collect::<Vec<usize>>()).prop_shuffle()) {
        let s = Schedule::new(perm.clone()).unwrap();
        for n in 1..=perm.len() {
            prop_assert_eq!(s.slot_of(s.device_at(n)), n);
        }
        let a = s.assignment();
        prop_assert!(a.iter().all(|row| row.iter().map(|&v| v as usize).sum::<usize>() == 1));
    }
}
