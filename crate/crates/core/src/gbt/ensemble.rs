use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, FeatureMatrix, TreeNode};
use crate::error::{Error, Result};
use crate::timeseries::{flatten_features, DayRecord, SupervisedPair};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtConfig {
    pub max_depth: usize,
    pub n_estimators: usize,
    pub colsample_bytree: f64,
    pub rate_drop: f64,
    pub learning_rate: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    pub seed: u64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            max_depth: 3,
            n_estimators: 200,
            colsample_bytree: 0.5,
            rate_drop: 0.1,
            learning_rate: 0.1,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            seed: 0,
        }
    }
}

impl GbtConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.colsample_bytree > 0.0 && self.colsample_bytree <= 1.0) {
            return Err(Error::InvalidConfig(
                "colsample_bytree must be in (0, 1]".into(),
            ));
        }
        // zero disables dropout
        if !(0.0..=1.0).contains(&self.rate_drop) {
            return Err(Error::InvalidConfig("rate_drop must be in [0, 1]".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(
                "learning_rate must be positive".into(),
            ));
        }
        if !(self.lambda >= 0.0 && self.gamma >= 0.0 && self.min_child_weight >= 0.0) {
            return Err(Error::InvalidConfig(
                "lambda, gamma and min_child_weight must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Number of columns drawn per tree.
    pub fn columns_per_tree(&self, n_cols: usize) -> usize {
        ((self.colsample_bytree * n_cols as f64 - 1e-9).ceil() as usize).clamp(1, n_cols)
    }
}

/// `base_score + Σ_k tree_weights[k] · tree_k(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedEnsemble {
    pub base_score: f64,
    pub trees: Vec<TreeNode>,
    pub tree_weights: Vec<f64>,
    pub learning_rate: f64,
}

impl BoostedEnsemble {
    pub fn predict_features(&self, x: &[f64]) -> f64 {
        let mut acc = self.base_score;
        for (tree, w) in self.trees.iter().zip(&self.tree_weights) {
            acc += w * tree.predict(x);
        }
        acc
    }

    pub fn predict_day(&self, day: &DayRecord) -> f64 {
        self.predict_features(&flatten_features(day))
    }
}

pub fn predict(ensemble: &BoostedEnsemble, day: &DayRecord) -> f64 {
    ensemble.predict_day(day)
}

/// Stateful DART booster over a fixed training set: each round fits one tree against
/// the ensemble with a dropout set removed, then renormalizes.
pub struct DartTrainer {
    x: FeatureMatrix,
    y: Vec<f64>,
    config: GbtConfig,
    ensemble: BoostedEnsemble,
    /// Raw output of every tree on every training row.
    tree_outputs: Vec<Vec<f64>>,
    rng: ChaCha8Rng,
}

impl DartTrainer {
    pub fn new(x: FeatureMatrix, y: Vec<f64>, config: GbtConfig) -> Result<Self> {
        config.validate()?;
        if x.n_rows() == 0 || x.n_cols() == 0 {
            return Err(Error::InsufficientData("empty training matrix".into()));
        }
        if y.len() != x.n_rows() {
            return Err(Error::LengthMismatch {
                left: y.len(),
                right: x.n_rows(),
            });
        }
        let base_score = y.iter().sum::<f64>() / y.len() as f64;
        Ok(DartTrainer {
            x,
            y,
            config,
            ensemble: BoostedEnsemble {
                base_score,
                trees: Vec::new(),
                tree_weights: Vec::new(),
                learning_rate: config.learning_rate,
            },
            tree_outputs: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        })
    }

    pub fn ensemble(&self) -> &BoostedEnsemble {
        &self.ensemble
    }

    /// Training predictions of the ensemble with the trees in `dropped` left out.
    pub fn predictions_without(&self, dropped: &[usize]) -> Vec<f64> {
        let mut keep = vec![true; self.ensemble.trees.len()];
        for &k in dropped {
            keep[k] = false;
        }
        (0..self.x.n_rows())
            .map(|i| {
                let mut acc = self.ensemble.base_score;
                for (k, out) in self.tree_outputs.iter().enumerate() {
                    if keep[k] {
                        acc += self.ensemble.tree_weights[k] * out[i];
                    }
                }
                acc
            })
            .collect()
    }

    pub fn training_mse(&self) -> f64 {
        let pred = self.predictions_without(&[]);
        pred.iter()
            .zip(&self.y)
            .map(|(p, y)| (p - y).powi(2))
            .sum::<f64>()
            / self.y.len() as f64
    }

    /// One boosting round with a random dropout set. Returns the root split gain of the
    /// new tree, `None` when it is a single leaf.
    pub fn round(&mut self) -> Result<Option<f64>> {
        let mut dropped = Vec::new();
        for k in 0..self.ensemble.trees.len() {
            if self.rng.random::<f64>() < self.config.rate_drop {
                dropped.push(k);
            }
        }
        self.round_with_dropout(&dropped)
    }

    /// One boosting round against the ensemble minus `dropped`.
    pub fn round_with_dropout(&mut self, dropped: &[usize]) -> Result<Option<f64>> {
        let mut dropped = dropped.to_vec();
        dropped.sort_unstable();
        dropped.dedup();
        if let Some(&k) = dropped.iter().find(|&&k| k >= self.ensemble.trees.len()) {
            return Err(Error::InvalidArgument(format!(
                "cannot drop unknown tree {k}"
            )));
        }

        let pred = self.predictions_without(&dropped);
        let grad: Vec<f64> = pred.iter().zip(&self.y).map(|(p, y)| p - y).collect();
        let hess = vec![1.0; grad.len()];

        let n_cols = self.x.n_cols();
        let take = self.config.columns_per_tree(n_cols);
        let mut features: Vec<usize> = if take == n_cols {
            (0..n_cols).collect()
        } else {
            rand::seq::index::sample(&mut self.rng, n_cols, take).into_vec()
        };
        features.sort_unstable();

        let (tree, root_gain) = grow_tree(&self.x, &grad, &hess, &self.config, &features)?;
        let outputs: Vec<f64> = (0..self.x.n_rows())
            .map(|i| tree.predict(self.x.row(i)))
            .collect();

        let k = dropped.len() as f64;
        for &j in &dropped {
            self.ensemble.tree_weights[j] *= k / (k + 1.0);
        }
        self.ensemble.trees.push(tree);
        self.ensemble
            .tree_weights
            .push(self.config.learning_rate / (k + 1.0));
        self.tree_outputs.push(outputs);
        Ok(root_gain)
    }

    pub fn finish(self) -> BoostedEnsemble {
        self.ensemble
    }
}

/// Runs exactly `n_estimators` rounds on a feature matrix.
pub fn fit_ensemble_matrix(
    x: FeatureMatrix,
    y: Vec<f64>,
    config: &GbtConfig,
) -> Result<BoostedEnsemble> {
    let mut trainer = DartTrainer::new(x, y, *config)?;
    for _ in 0..config.n_estimators {
        trainer.round()?;
    }
    Ok(trainer.finish())
}

/// Fits the scalar next-day minimum from the 144 flattened features of each input day.
pub fn fit_ensemble(train: &[SupervisedPair], config: &GbtConfig) -> Result<BoostedEnsemble> {
    if train.is_empty() {
        return Err(Error::InsufficientData("no training pairs".into()));
    }
    let rows: Vec<_> = train.iter().map(|p| flatten_features(&p.input)).collect();
    let y = train.iter().map(|p| p.target_min).collect();
    fit_ensemble_matrix(FeatureMatrix::from_rows(&rows)?, y, config)
}
