use proptest::prelude::*;

use fwips_core::sim::{self, generate_survey, make_environment, Bounds, PathLossParams, Scenario, SurveyConfig};
use fwips_core::seeded_rng;

fn environment(n_aps: usize, seed: u64) -> sim::Environment {
    make_environment(n_aps, Bounds::rect(10.0, 6.0).unwrap(), PathLossParams::default(), &mut seeded_rng(seed, 4)).unwrap()
}

proptest! {
    #[test]
    fn every_reading_is_above_the_floor_or_the_sentinel(seed in 0u64..10_000, x in 0.0f64..10.0, y in 0.0f64..6.0) {
        let mut env = environment(6, seed);
        env.params.shadow_sigma = 12.0;
        let rss = env.rss_at(&[x, y], Some(&mut seeded_rng(seed, 5))).unwrap();
        prop_assert!(rss.iter().all(|&v| v >= env.params.rss_floor || v == env.params.sentinel));
    }

    #[test]
    fn noiseless_rss_decreases_with_distance(d in 1.0f64..200.0, step in 0.01f64..50.0) {
        let env = environment(1, 0);
        prop_assert!(env.mean_rss(d + step) < env.mean_rss(d));
    }

    #[test]
    fn equidistant_positions_receive_equal_rss(seed in 0u64..1000, r in 0.5f64..5.0, a in 0.0f64..6.3, b in 0.0f64..6.3) {
        let mut env = environment(1, seed);
        env.bounds = Bounds::rect(100.0, 100.0).unwrap();
        env.ap_positions = vec![vec![50.0, 50.0]];
        let p = |t: f64| [50.0 + r * t.cos(), 50.0 + r * t.sin()];
        let (ra, rb) = (env.rss_at(&p(a), None).unwrap(), env.rss_at(&p(b), None).unwrap());
        prop_assert!((ra[0] - rb[0]).abs() < 1e-9);
    }
}

#[test]
fn aps_are_placed_inside_the_bounds() {
    let env = environment(8, 3);
    assert_eq!(env.ap_positions.len(), 8);
    assert!(env.ap_positions.iter().all(|p| env.bounds.contains(p)));
}

#[test]
fn repeated_survey_points_yield_repeated_rows() {
    let env = make_environment(3, Bounds::rect(4.0, 4.0).unwrap(), PathLossParams::default(), &mut seeded_rng(0, 4)).unwrap();
    let cfg = SurveyConfig {
        samples_per_rp: 3,
        n_test: 10,
        ..SurveyConfig::default()
    };
    let (rm, test) = generate_survey(&env, &cfg).unwrap();
    assert_eq!(rm.n_rp(), 75);
    assert_eq!(test.n_rp(), 10);
    for g in 0..25 {
        assert_eq!(rm.coord_row(3 * g), rm.coord_row(3 * g + 2));
    }
    assert!((0..test.n_rp()).all(|i| env.bounds.contains(&test.coord_row(i).to_vec())));
}

#[test]
fn simulation_is_deterministic_end_to_end() {
    let scenario = Scenario {
        bounds: Bounds::rect(5.0, 5.0).unwrap(),
        ..Scenario::default()
    };
    let seed = seeded_rng(9, 0).random_range(0..1000);
    let (ea, ra, ta) = sim::simulate(&scenario, seed).unwrap();
    let (eb, rb, tb) = sim::simulate(&scenario, seed).unwrap();
    assert_eq!(ea.to_json().unwrap(), eb.to_json().unwrap());
    assert_eq!(ra.to_csv_string(), rb.to_csv_string());
    assert_eq!(ta.to_csv_string(), tb.to_csv_string());
    let (_, rc, _) = sim::simulate(&scenario, seed + 1).unwrap();
    assert_ne!(ra.rss(), rc.rss());
}

#[test]
fn environment_file_round_trip() {
    let env = environment(4, 1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("env.json");
    env.save(&path).unwrap();
    assert_eq!(sim::Environment::load(&path).unwrap(), env);
}
