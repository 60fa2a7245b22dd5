//! Independent reference implementations shared by the integration tests and the
//! acceptance target.
#![allow(dead_code)]

use chrono::NaiveDate;
use frostcast::gbt::{fit_tree, BoostedEnsemble, FeatureMatrix, GbtConfig, TreeNode};
use frostcast::synthgen::{generate_station, ClimateConfig};
use frostcast::timeseries::{DayRecord, Sample, StationSeries, SupervisedPair, INTERVALS_PER_DAY};

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    if h + lambda > 0.0 {
        g * g / (h + lambda)
    } else {
        0.0
    }
}

fn weight(g: f64, h: f64, lambda: f64) -> f64 {
    if h + lambda > 0.0 {
        -g / (h + lambda)
    } else {
        0.0
    }
}

/// Exhaustive split search: every feature, every midpoint between distinct values,
/// children sums recomputed from scratch by filtering the rows.
pub fn brute_force_tree(
    x: &[Vec<f64>],
    g: &[f64],
    h: &[f64],
    config: &GbtConfig,
    features: &[usize],
) -> TreeNode {
    let rows: Vec<usize> = (0..x.len()).collect();
    brute_node(x, g, h, config, features, &rows, 0)
}

fn brute_node(
    x: &[Vec<f64>],
    g: &[f64],
    h: &[f64],
    config: &GbtConfig,
    features: &[usize],
    rows: &[usize],
    depth: usize,
) -> TreeNode {
    let sum = |rs: &[usize], v: &[f64]| rs.iter().map(|&i| v[i]).sum::<f64>();
    let (gs, hs) = (sum(rows, g), sum(rows, h));
    let leaf = TreeNode::Leaf {
        weight: weight(gs, hs, config.lambda),
    };
    if depth >= config.max_depth || rows.len() < 2 {
        return leaf;
    }
    let mut best: Option<(f64, usize, f64)> = None;
    for &f in features {
        let mut values: Vec<f64> = rows.iter().map(|&i| x[i][f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for pair in values.windows(2) {
            let t = pair[0] + (pair[1] - pair[0]) / 2.0;
            if t <= pair[0] {
                continue;
            }
            let left: Vec<usize> = rows.iter().copied().filter(|&i| x[i][f] < t).collect();
            let right: Vec<usize> = rows.iter().copied().filter(|&i| x[i][f] >= t).collect();
            let (gl, hl, gr, hr) = (sum(&left, g), sum(&left, h), sum(&right, g), sum(&right, h));
            if hl < config.min_child_weight || hr < config.min_child_weight {
                continue;
            }
            let gain = 0.5
                * (score(gl, hl, config.lambda) + score(gr, hr, config.lambda)
                    - score(gs, hs, config.lambda))
                - config.gamma;
            if gain > 0.0 && best.is_none_or(|(b, _, _)| gain > b) {
                best = Some((gain, f, t));
            }
        }
    }
    let Some((_, f, t)) = best else { return leaf };
    let left: Vec<usize> = rows.iter().copied().filter(|&i| x[i][f] < t).collect();
    let right: Vec<usize> = rows.iter().copied().filter(|&i| x[i][f] >= t).collect();
    TreeNode::Split {
        feature: f,
        threshold: t,
        left: Box::new(brute_node(x, g, h, config, features, &left, depth + 1)),
        right: Box::new(brute_node(x, g, h, config, features, &right, depth + 1)),
    }
}

/// Textbook gradient boosting for squared error: `F <- F + eta * tree(x)` with every
/// tree fitted on all columns against the full current model.
pub struct PlainBoost {
    pub base: f64,
    pub trees: Vec<TreeNode>,
    pub fitted: Vec<f64>,
}

pub fn plain_boost(x: &FeatureMatrix, y: &[f64], config: &GbtConfig) -> PlainBoost {
    let n = y.len();
    let base = y.iter().sum::<f64>() / n as f64;
    let mut fitted = vec![base; n];
    let features: Vec<usize> = (0..x.n_cols()).collect();
    let hess = vec![1.0; n];
    let mut trees = Vec::new();
    for _ in 0..config.n_estimators {
        let grad: Vec<f64> = (0..n).map(|i| fitted[i] - y[i]).collect();
        let tree = fit_tree(x, &grad, &hess, config, &features).unwrap();
        for (i, f) in fitted.iter_mut().enumerate() {
            *f += config.learning_rate * tree.predict(x.row(i));
        }
        trees.push(tree);
    }
    PlainBoost {
        base,
        trees,
        fitted,
    }
}

pub fn ensemble_fitted(e: &BoostedEnsemble, x: &FeatureMatrix) -> Vec<f64> {
    (0..x.n_rows())
        .map(|i| e.predict_features(x.row(i)))
        .collect()
}

pub fn date(offset: i64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Duration::days(offset)
}

/// Day whose min channel is `curve`, with `t_max = t_min + 1` and `t_dew = t_min - 2`.
pub fn day_from_curve(offset: i64, curve: &[f64; INTERVALS_PER_DAY]) -> DayRecord {
    let samples = curve.map(|v| Sample::new(v, v + 1.0, v - 2.0).unwrap());
    DayRecord::new(date(offset), samples).unwrap()
}

/// Pairs whose next-day minimum is exactly `a * t_max[k] + b * t_dew[k] + c`.
pub fn planted_pairs(n: usize, k: usize, (a, b, c): (f64, f64, f64)) -> Vec<SupervisedPair> {
    (0..n)
        .map(|j| {
            let j_f = j as f64;
            let t_max = 18.0 + 9.0 * (0.37 * j_f).sin();
            let t_dew = t_max - 3.0 - 4.0 * (1.0 + (0.91 * j_f).cos());
            let mut curve = [t_max - 6.0; INTERVALS_PER_DAY];
            curve[k] = t_max - 0.5;
            let mut input = day_from_curve(2 * j as i64, &curve);
            input.samples[k] = Sample::new(t_max - 0.5, t_max, t_dew).unwrap();
            let target = a * t_max + b * t_dew + c;
            let next = day_from_curve(2 * j as i64 + 1, &[target; INTERVALS_PER_DAY]);
            SupervisedPair::new(input, &next)
        })
        .collect()
}

/// The behavioral benchmark station: three years, frequent frost, noisy weather.
pub fn benchmark_station(seed: u64) -> StationSeries {
    let config = ClimateConfig {
        frost_prob: 0.15,
        noise_sd: 1.5,
        seed,
        ..ClimateConfig::default()
    };
    generate_station(&config, 3 * 365, "benchmark").unwrap()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
