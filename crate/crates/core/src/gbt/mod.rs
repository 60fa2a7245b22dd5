//! Gradient-boosted regression trees with a second-order objective, exact greedy
//! split search, per-tree column subsampling and DART dropout.

mod ensemble;
mod tree;

pub use ensemble::{
    fit_ensemble, fit_ensemble_matrix, predict, BoostedEnsemble, DartTrainer, GbtConfig,
};
pub use tree::{fit_tree, FeatureMatrix, TreeNode};
