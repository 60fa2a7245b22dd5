use serde::{Deserialize, Serialize};

use super::GbtConfig;
use crate::error::{Error, Result};

/// Dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: n_rows * n_cols,
            });
        }
        Ok(FeatureMatrix {
            n_rows,
            n_cols,
            data,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            if r.as_ref().len() != n_cols {
                return Err(Error::LengthMismatch {
                    left: r.as_ref().len(),
                    right: n_cols,
                });
            }
            data.extend_from_slice(r.as_ref());
        }
        Ok(FeatureMatrix {
            n_rows: rows.len(),
            n_cols,
            data,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }
}

/// Regression tree node. Rows with `x[feature] < threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum TreeNode {
    Leaf {
        weight: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { weight } => return *weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] < *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn max_feature(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf { .. } => None,
            TreeNode::Split {
                feature,
                left,
                right,
                ..
            } => Some(
                (*feature)
                    .max(left.max_feature().unwrap_or(0))
                    .max(right.max_feature().unwrap_or(0)),
            ),
        }
    }
}

pub(crate) fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    let denom = h + lambda;
    if denom > 0.0 {
        -g / denom
    } else {
        0.0
    }
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    let denom = h + lambda;
    if denom > 0.0 {
        g * g / denom
    } else {
        0.0
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Exact greedy tree; see [`grow_tree`] for the root gain.
pub fn fit_tree(
    x: &FeatureMatrix,
    g: &[f64],
    h: &[f64],
    config: &GbtConfig,
    feature_subset: &[usize],
) -> Result<TreeNode> {
    grow_tree(x, g, h, config, feature_subset).map(|(t, _)| t)
}

/// Fits a tree and returns it with the gain of the root split (`None` for a leaf).
///
/// Candidate thresholds are midpoints between consecutive distinct values; a candidate
/// is admissible when both children keep a hessian sum of at least
/// `min_child_weight`. The best admissible candidate is taken by strictly greater gain,
/// scanning features in ascending index and thresholds in ascending value, and the node
/// splits only if that gain is positive.
pub(crate) fn grow_tree(
    x: &FeatureMatrix,
    g: &[f64],
    h: &[f64],
    config: &GbtConfig,
    feature_subset: &[usize],
) -> Result<(TreeNode, Option<f64>)> {
    if x.n_rows() == 0 {
        return Err(Error::InsufficientData(
            "cannot fit a tree on empty data".into(),
        ));
    }
    if g.len() != x.n_rows() || h.len() != x.n_rows() {
        return Err(Error::LengthMismatch {
            left: g.len().min(h.len()),
            right: x.n_rows(),
        });
    }
    if feature_subset.is_empty() {
        return Err(Error::InvalidArgument("empty feature subset".into()));
    }
    if let Some(&f) = feature_subset.iter().find(|&&f| f >= x.n_cols()) {
        return Err(Error::InvalidArgument(format!("feature {f} out of range")));
    }
    let mut features = feature_subset.to_vec();
    features.sort_unstable();
    features.dedup();
    let rows: Vec<usize> = (0..x.n_rows()).collect();
    let mut root_gain = None;
    let tree = grow(x, g, h, config, &features, rows, 0, &mut root_gain);
    Ok((tree, root_gain))
}

#[allow(clippy::too_many_arguments)]
fn grow(
    x: &FeatureMatrix,
    g: &[f64],
    h: &[f64],
    config: &GbtConfig,
    features: &[usize],
    rows: Vec<usize>,
    depth: usize,
    root_gain: &mut Option<f64>,
) -> TreeNode {
    let g_sum: f64 = rows.iter().map(|&i| g[i]).sum();
    let h_sum: f64 = rows.iter().map(|&i| h[i]).sum();
    let leaf = TreeNode::Leaf {
        weight: leaf_weight(g_sum, h_sum, config.lambda),
    };
    if depth >= config.max_depth || rows.len() < 2 {
        return leaf;
    }
    let Some(best) = best_split(x, g, h, config, features, &rows, g_sum, h_sum) else {
        return leaf;
    };
    if depth == 0 {
        *root_gain = Some(best.gain);
    }
    let (left, right): (Vec<usize>, Vec<usize>) = rows
        .into_iter()
        .partition(|&i| x.get(i, best.feature) < best.threshold);
    TreeNode::Split {
        feature: best.feature,
        threshold: best.threshold,
        left: Box::new(grow(x, g, h, config, features, left, depth + 1, root_gain)),
        right: Box::new(grow(x, g, h, config, features, right, depth + 1, root_gain)),
    }
}

#[allow(clippy::too_many_arguments)]
fn best_split(
    x: &FeatureMatrix,
    g: &[f64],
    h: &[f64],
    config: &GbtConfig,
    features: &[usize],
    rows: &[usize],
    g_sum: f64,
    h_sum: f64,
) -> Option<Candidate> {
    let parent = score(g_sum, h_sum, config.lambda);
    let mut best: Option<Candidate> = None;
    let mut sorted = rows.to_vec();
    for &f in features {
        sorted.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)));
        let (mut g_left, mut h_left) = (0.0, 0.0);
        for w in 0..sorted.len() - 1 {
            let i = sorted[w];
            g_left += g[i];
            h_left += h[i];
            let lo = x.get(i, f);
            let hi = x.get(sorted[w + 1], f);
            if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
                continue;
            }
            let threshold = lo + (hi - lo) / 2.0;
            if threshold <= lo {
                continue;
            }
            let (g_right, h_right) = (g_sum - g_left, h_sum - h_left);
            if h_left < config.min_child_weight || h_right < config.min_child_weight {
                continue;
            }
            let gain = 0.5
                * (score(g_left, h_left, config.lambda) + score(g_right, h_right, config.lambda)
                    - parent)
                - config.gamma;
            if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(Candidate {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}
