mod common;

use frostcast::gbt::{
    fit_ensemble, fit_ensemble_matrix, fit_tree, DartTrainer, FeatureMatrix, GbtConfig, TreeNode,
};
use frostcast::synthgen::{generate_station, ClimateConfig};
use frostcast::timeseries::{build_pairs, flatten_features};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn station_matrix(days: usize) -> (FeatureMatrix, Vec<f64>) {
    let series = generate_station(&ClimateConfig::default(), days, "g").unwrap();
    let pairs = build_pairs(&series).unwrap();
    let rows: Vec<_> = pairs.iter().map(|p| flatten_features(&p.input)).collect();
    let y = pairs.iter().map(|p| p.target_min).collect();
    (FeatureMatrix::from_rows(&rows).unwrap(), y)
}

#[test]
fn exact_greedy_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(91);
    for trial in 0..200 {
        let n = rng.random_range(2..=50);
        let p = rng.random_range(1..=3);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..p)
                    .map(|_| rng.random_range(0..8) as f64 - 3.5)
                    .collect()
            })
            .collect();
        let g: Vec<f64> = (0..n)
            .map(|_| rng.random_range(-16..=16) as f64 / 4.0)
            .collect();
        let h = vec![1.0; n];
        let config = GbtConfig {
            max_depth: rng.random_range(1..=5),
            lambda: 1.0,
            min_child_weight: [1.0, 3.0][rng.random_range(0..2)],
            ..GbtConfig::default()
        };
        let features: Vec<usize> = (0..p).collect();
        let fm = FeatureMatrix::from_rows(&x).unwrap();
        assert_eq!(
            fit_tree(&fm, &g, &h, &config, &features).unwrap(),
            common::brute_force_tree(&x, &g, &h, &config, &features),
            "trial {trial}"
        );
    }
}

#[test]
fn tree_predictions_match_leaf_means_without_regularization() {
    // lambda 0 makes every leaf the mean residual of its rows
    let x = FeatureMatrix::from_rows(&[[1.0], [2.0], [3.0], [10.0], [11.0], [12.0]]).unwrap();
    let y = [1.0, 2.0, 3.0, 10.0, 11.0, 12.0];
    let g: Vec<f64> = y.iter().map(|v| -v).collect();
    let config = GbtConfig {
        max_depth: 1,
        lambda: 0.0,
        ..GbtConfig::default()
    };
    let t = fit_tree(&x, &g, &[1.0; 6], &config, &[0]).unwrap();
    assert_eq!(t.predict(&[0.0]), 2.0);
    assert_eq!(t.predict(&[11.5]), 11.0);
    assert!(matches!(t, TreeNode::Split { threshold, .. } if threshold == 6.5));
}

#[test]
fn dart_without_dropout_is_plain_boosting() {
    let (x, y) = station_matrix(41);
    let config = GbtConfig {
        n_estimators: 25,
        rate_drop: 0.0,
        colsample_bytree: 1.0,
        ..GbtConfig::default()
    };
    let dart = fit_ensemble_matrix(x.clone(), y.clone(), &config).unwrap();
    let plain = common::plain_boost(&x, &y, &config);
    assert_eq!(dart.trees, plain.trees);
    assert!(dart.tree_weights.iter().all(|&w| w == config.learning_rate));
    for (a, b) in common::ensemble_fitted(&dart, &x).iter().zip(&plain.fitted) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn training_error_never_increases_without_dropout() {
    let (x, y) = station_matrix(61);
    let config = GbtConfig {
        rate_drop: 0.0,
        colsample_bytree: 1.0,
        learning_rate: 0.2,
        ..GbtConfig::default()
    };
    let mut t = DartTrainer::new(x, y, config).unwrap();
    let mut prev = t.training_mse();
    for round in 0..60 {
        let gain = t.round().unwrap();
        let now = t.training_mse();
        if gain.is_some_and(|g| g > 0.0) {
            assert!(now <= prev, "round {round}: {now} > {prev}");
        }
        prev = now;
    }
}

#[test]
fn dropout_rounds_renormalize() {
    let (x, y) = station_matrix(31);
    let config = GbtConfig {
        colsample_bytree: 1.0,
        learning_rate: 0.4,
        ..GbtConfig::default()
    };
    let mut t = DartTrainer::new(x, y, config).unwrap();
    for _ in 0..3 {
        t.round_with_dropout(&[]).unwrap();
    }
    t.round_with_dropout(&[0, 2]).unwrap();
    let w = &t.ensemble().tree_weights;
    let third = 0.4 * (2.0 / 3.0);
    assert_eq!(w, &vec![third, 0.4, third, 0.4 / 3.0]);
}

#[test]
fn column_sampling_limits_features() {
    let (x, y) = station_matrix(41);
    let config = GbtConfig {
        n_estimators: 30,
        colsample_bytree: 0.05,
        seed: 3,
        ..GbtConfig::default()
    };
    let e = fit_ensemble_matrix(x, y, &config).unwrap();
    assert_eq!(e.trees.len(), 30);
    assert!(e.trees.iter().all(|t| t.depth() <= 3));
    assert!(e
        .trees
        .iter()
        .filter_map(TreeNode::max_feature)
        .all(|f| f < 144));
}

#[test]
fn overfits_fifty_pairs() {
    let series = generate_station(
        &ClimateConfig {
            seed: 8,
            ..ClimateConfig::default()
        },
        51,
        "o",
    )
    .unwrap();
    let pairs = build_pairs(&series).unwrap();
    let config = GbtConfig {
        n_estimators: 500,
        max_depth: 6,
        learning_rate: 0.3,
        rate_drop: 0.0,
        ..GbtConfig::default()
    };
    let e = fit_ensemble(&pairs, &config).unwrap();
    let mse = pairs
        .iter()
        .map(|p| (e.predict_day(&p.input) - p.target_min).powi(2))
        .sum::<f64>()
        / 50.0;
    assert!(mse.sqrt() < 0.1, "{}", mse.sqrt());
}
