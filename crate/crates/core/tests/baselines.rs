use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng as _;

use fwips_core::baselines::{build_baseline, knn_predict, BaselineKind, BaselineModel, KnnConfig};
use fwips_core::data::{MinMaxScaler, RadioMap, StdScaler};
use fwips_core::nn::TrainConfig;
use fwips_core::{seeded_rng, Rng};

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Exhaustive reference: stable sort by (distance, index), then the same
/// weighting rule as the positioner.
fn oracle(rm: &RadioMap, q: &[f64], cfg: &KnnConfig) -> Vec<f64> {
    let mut order: Vec<(f64, usize)> = (0..rm.n_rp())
        .map(|i| (sq_dist(&rm.rss_row(i).to_vec(), q).sqrt(), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let top = &order[..cfg.k];
    if cfg.weighted && top[0].0 == 0.0 {
        return rm.coord_row(top[0].1).to_vec();
    }
    let mut acc = vec![0.0; rm.dim()];
    let mut total = 0.0;
    for &(d, i) in top {
        let w = if cfg.weighted { 1.0 / d } else { 1.0 };
        for (a, c) in acc.iter_mut().zip(rm.coord_row(i)) {
            *a += w * c;
        }
        total += w;
    }
    acc.iter().map(|a| a / total).collect()
}

fn random_map(rng: &mut Rng, n_rp: usize, n_ap: usize, levels: i32) -> RadioMap {
    let rss = Array2::from_shape_simple_fn((n_rp, n_ap), || -40.0 - rng.random_range(0..levels) as f64);
    let coords = Array2::from_shape_simple_fn((n_rp, 2), || rng.random_range(-5.0..5.0));
    RadioMap::new(coords, rss, RadioMap::default_ap_ids(n_ap)).unwrap()
}

proptest! {
    #[test]
    fn knn_matches_exhaustive_oracle(
        seed in 0u64..100_000,
        k_index in 0usize..4,
        extra in 0usize..20,
        n_ap in 1usize..5,
        weighted: bool,
    ) {
        let k = [1, 2, 3, 5][k_index];
        let mut rng = seeded_rng(seed, 0);
        let rm = random_map(&mut rng, k + extra, n_ap, 4);
        let q: Vec<f64> = (0..n_ap).map(|_| -40.0 - rng.random_range(0..5) as f64).collect();
        let cfg = KnnConfig { k, weighted };
        prop_assert_eq!(knn_predict(&rm, &q, &cfg).unwrap(), oracle(&rm, &q, &cfg));
    }

    #[test]
    fn knn_is_translation_equivariant(seed in 0u64..10_000, tx in -50.0f64..50.0, ty in -50.0f64..50.0) {
        let mut rng = seeded_rng(seed, 0);
        let rm = random_map(&mut rng, 15, 3, 30);
        let shifted_coords = rm.coords() + &ndarray::arr1(&[tx, ty]);
        let shifted = RadioMap::new(shifted_coords, rm.rss().clone(), rm.ap_ids().to_vec()).unwrap();
        let q: Vec<f64> = (0..3).map(|_| rng.random_range(-70.0..-40.0)).collect();
        let cfg = KnnConfig::default();
        let a = knn_predict(&rm, &q, &cfg).unwrap();
        let b = knn_predict(&shifted, &q, &cfg).unwrap();
        prop_assert!((a[0] + tx - b[0]).abs() < 1e-9 && (a[1] + ty - b[1]).abs() < 1e-9);
    }
}

fn scalers(rm: &RadioMap) -> (MinMaxScaler, StdScaler) {
    (MinMaxScaler::fit(rm.rss().view()).unwrap(), StdScaler::fit(rm.coords().view()).unwrap())
}

#[test]
fn post_and_built_in_scaling_agree() {
    let mut rng = seeded_rng(21, 0);
    let rm = random_map(&mut rng, 30, 5, 40);
    let (rss_scaler, coord_scaler) = scalers(&rm);
    let post = build_baseline(BaselineKind::BmPost, 5, 2, &[], &coord_scaler, &mut seeded_rng(1, 0)).unwrap();
    let mut built_in = build_baseline(BaselineKind::BmBuiltIn, 5, 2, &[], &coord_scaler, &mut seeded_rng(2, 0)).unwrap();
    built_in.layers_mut()[0] = post.layers()[0].clone();
    let a = BaselineModel::new(BaselineKind::BmPost, post, rss_scaler.clone(), coord_scaler.clone()).unwrap();
    let b = BaselineModel::new(BaselineKind::BmBuiltIn, built_in, rss_scaler, coord_scaler).unwrap();
    let queries = Array2::from_shape_simple_fn((50, 5), || rng.random_range(-90.0..-30.0));
    let pa = a.predict_batch(queries.view()).unwrap();
    let pb = b.predict_batch(queries.view()).unwrap();
    assert!(pa.iter().zip(pb.iter()).all(|(x, y)| (x - y).abs() < 1e-9));
}

#[test]
fn frozen_scaling_layer_survives_training() {
    let mut rng = seeded_rng(22, 0);
    let rm = random_map(&mut rng, 40, 4, 40);
    let cfg = TrainConfig {
        max_epochs: 10,
        ..TrainConfig::default()
    };
    let (model, _) = BaselineModel::fit(BaselineKind::BmBuiltIn, &rm, &[], &cfg).unwrap();
    let last = model.network.layers().last().unwrap();
    assert!(!last.trainable);
    let expected = ndarray::Array2::from_diag(&ndarray::arr1(&model.coord_scaler.std));
    assert_eq!(last.weights, expected);
    assert_eq!(last.biases.to_vec(), model.coord_scaler.mean);
}

#[test]
fn dlpm_output_dimension_matches_map() {
    let mut rng = seeded_rng(23, 0);
    for dim in [2usize, 3] {
        let rss = Array2::from_shape_simple_fn((20, 6), || rng.random_range(-90.0..-30.0));
        let coords = Array2::from_shape_simple_fn((20, dim), || rng.random_range(0.0..10.0));
        let rm = RadioMap::new(coords, rss, RadioMap::default_ap_ids(6)).unwrap();
        let cfg = TrainConfig {
            max_epochs: 2,
            ..TrainConfig::default()
        };
        let (model, _) = BaselineModel::fit(BaselineKind::Dlpm, &rm, &[16, 8], &cfg).unwrap();
        let pred = model.predict_batch(rm.rss().view()).unwrap();
        assert_eq!(pred.dim(), (20, dim));
    }
}

#[test]
fn dlpm_fits_a_single_reference_point() {
    // One distinct location surveyed twice; the coordinate scaler needs spread,
    // so the two samples sit a few centimetres apart.
    let coords = Array2::from_shape_vec((2, 2), vec![4.0, 7.0, 4.02, 7.02]).unwrap();
    let rss = Array2::from_shape_vec((2, 3), vec![-50.0, -60.0, -70.0, -51.0, -61.0, -71.0]).unwrap();
    let rm = RadioMap::new(coords, rss, RadioMap::default_ap_ids(3)).unwrap();
    let cfg = TrainConfig {
        max_epochs: 2000,
        patience: 2000,
        learning_rate: 1e-2,
        ..TrainConfig::default()
    };
    let (model, _) = BaselineModel::fit(BaselineKind::Dlpm, &rm, &[16, 8], &cfg).unwrap();
    let pred = model.predict(&[-50.5, -60.5, -70.5]).unwrap();
    assert!((pred[0] - 4.01).abs() < 0.05 && (pred[1] - 7.01).abs() < 0.05, "{pred:?}");
}
