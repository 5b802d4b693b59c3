use std::collections::BTreeSet;

use ndarray::Array2;
use proptest::prelude::*;

use fwips_core::data::{self, MinMaxScaler, RadioMap, StdScaler, DEFAULT_SENTINEL};
use fwips_core::seeded_rng;

fn matrix(rows: usize, cols: usize, values: &[f64]) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |(i, j)| values[(i * cols + j) % values.len()] + (i * 7 + j) as f64 * 1e-3)
}

proptest! {
    #[test]
    fn std_scaler_round_trip(rows in 2usize..20, values in prop::collection::vec(-1e3f64..1e3, 8..40)) {
        let coords = matrix(rows, 2, &values);
        let scaler = StdScaler::fit(coords.view()).unwrap();
        let back = scaler.inverse(scaler.apply(coords.view()).unwrap().view()).unwrap();
        for (a, b) in back.iter().zip(coords.iter()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn minmax_image_is_unit_interval(
        train in prop::collection::vec(-100f64..-20.0, 12..40),
        test in prop::collection::vec(-120f64..0.0, 4),
    ) {
        let rss = matrix(train.len() / 4, 4, &train);
        let scaler = MinMaxScaler::fit(rss.view()).unwrap();
        let out = scaler.apply(rss.view()).unwrap();
        prop_assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));
        let row = scaler.apply_row(&test).unwrap();
        prop_assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn split_is_a_partition(n in 2usize..60, fraction in 0.1f64..0.9, seed in 0u64..100) {
        let coords = Array2::from_shape_fn((n, 2), |(i, j)| (i * 2 + j) as f64);
        let rss = Array2::from_shape_fn((n, 3), |(i, j)| -40.0 - (i + j) as f64);
        let rm = RadioMap::new(coords, rss, RadioMap::default_ap_ids(3)).unwrap();
        let Ok((train, test)) = data::split(&rm, fraction, &mut seeded_rng(seed, 0)) else {
            return Ok(());
        };
        prop_assert_eq!(train.n_rp() + test.n_rp(), n);
        let key = |m: &RadioMap, i: usize| m.coord_row(i)[0] as i64;
        let a: BTreeSet<i64> = (0..train.n_rp()).map(|i| key(&train, i)).collect();
        let b: BTreeSet<i64> = (0..test.n_rp()).map(|i| key(&test, i)).collect();
        prop_assert!(a.is_disjoint(&b));
        prop_assert_eq!(a.len() + b.len(), n);
        let again = data::split(&rm, fraction, &mut seeded_rng(seed, 0)).unwrap();
        prop_assert_eq!(&again.0, &train);
    }
}

#[test]
fn csv_file_round_trip_keeps_full_precision() {
    let coords = Array2::from_shape_vec((2, 2), vec![0.1, 1.0 / 3.0, 2.0_f64.sqrt(), -7.25]).unwrap();
    let rss = Array2::from_shape_vec((2, 3), vec![-45.123456789012345, -60.0, DEFAULT_SENTINEL, -1.0 / 7.0, -88.5, -99.0])
        .unwrap();
    let rm = RadioMap::new(coords, rss, vec!["a".into(), "b".into(), "c".into()]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rm.csv");
    rm.save(&path).unwrap();
    let loaded = data::load_radio_map(&path).unwrap();
    assert_eq!(loaded, rm);
    assert_eq!(loaded.to_csv_string(), rm.to_csv_string());
}

#[test]
fn missing_file_is_an_io_error() {
    let err = data::load_radio_map("/nonexistent/rm.csv").unwrap_err();
    assert!(err.to_string().contains("rm.csv"), "{err}");
}
