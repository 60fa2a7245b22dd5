use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training objective for the sequence models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Mse,
    /// Mean squared error plus the absolute gap between the sequence minima.
    Custom,
}

impl LossKind {
    pub fn evaluate(self, pred: &[f64], truth: &[f64]) -> Result<LossValue> {
        match self {
            LossKind::Mse => mse_loss(pred, truth).map(|m| LossValue {
                total: m,
                mse_term: m,
                min_gap_term: 0.0,
            }),
            LossKind::Custom => custom_loss(pred, truth),
        }
    }

    pub fn gradient(self, pred: &[f64], truth: &[f64]) -> Result<Vec<f64>> {
        match self {
            LossKind::Mse => mse_loss_grad(pred, truth),
            LossKind::Custom => custom_loss_grad(pred, truth),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::Custom => "custom",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(LossKind::Mse),
            "custom" => Ok(LossKind::Custom),
            other => Err(Error::InvalidArgument(format!("unknown loss {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub total: f64,
    pub mse_term: f64,
    pub min_gap_term: f64,
}

fn check_lengths(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    Ok(())
}

/// First index of the minimum.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

fn min_of(values: &[f64]) -> f64 {
    values[argmin(values)]
}

pub fn mse_loss(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
}

pub fn mse_loss_grad(pred: &[f64], truth: &[f64]) -> Result<Vec<f64>> {
    check_lengths(pred, truth)?;
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(truth)
        .map(|(p, t)| 2.0 * (p - t) / n)
        .collect())
}

/// `(1/n) * sum (pred - truth)^2 + |min(pred) - min(truth)|`.
pub fn custom_loss(pred: &[f64], truth: &[f64]) -> Result<LossValue> {
    let mse_term = mse_loss(pred, truth)?;
    let min_gap_term = (min_of(pred) - min_of(truth)).abs();
    Ok(LossValue {
        total: mse_term + min_gap_term,
        mse_term,
        min_gap_term,
    })
}

/// Subgradient of [`custom_loss`]: the min-gap term routes `sign(gap)` to the first
/// argmin of `pred`, with `sign(0) = 0`.
pub fn custom_loss_grad(pred: &[f64], truth: &[f64]) -> Result<Vec<f64>> {
    let mut grad = mse_loss_grad(pred, truth)?;
    let j = argmin(pred);
    let gap = pred[j] - min_of(truth);
    let sign = if gap > 0.0 {
        1.0
    } else if gap < 0.0 {
        -1.0
    } else {
        0.0
    };
    grad[j] += sign;
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_is_zero() {
        let y: Vec<f64> = (0..48).map(|i| (i as f64).sin()).collect();
        let l = custom_loss(&y, &y).unwrap();
        assert_eq!((l.total, l.mse_term, l.min_gap_term), (0.0, 0.0, 0.0));
        assert!(custom_loss_grad(&y, &y).unwrap().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn constant_shift() {
        let y: Vec<f64> = (0..48).map(|i| (i as f64 * 0.3).cos() * 4.0).collect();
        let p: Vec<f64> = y.iter().map(|v| v + 1.0).collect();
        let l = custom_loss(&p, &y).unwrap();
        assert_eq!(l.mse_term, 1.0);
        assert_eq!(l.min_gap_term, 1.0);
        assert_eq!(l.total, 2.0);

        let j = argmin(&p);
        let g = custom_loss_grad(&p, &y).unwrap();
        for (i, gi) in g.iter().enumerate() {
            let expect = 2.0 / 48.0 + if i == j { 1.0 } else { 0.0 };
            assert!((gi - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn single_dip() {
        let y = vec![0.0; 48];
        let mut p = vec![0.0; 48];
        p[10] = -4.8;
        let l = custom_loss(&p, &y).unwrap();
        assert!((l.mse_term - 4.8 * 4.8 / 48.0).abs() < 1e-12);
        assert!((l.mse_term - 0.48).abs() < 1e-12);
        assert!((l.min_gap_term - 4.8).abs() < 1e-12);
        assert!((l.total - 5.28).abs() < 1e-12);
    }

    #[test]
    fn argmin_ties_take_first_index() {
        let y = vec![1.0; 48];
        let mut p = vec![3.0; 48];
        p[5] = 2.0;
        p[9] = 2.0;
        let g = custom_loss_grad(&p, &y).unwrap();
        assert!((g[5] - (2.0 * 1.0 / 48.0 + 1.0)).abs() < 1e-15);
        assert!((g[9] - 2.0 / 48.0).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch() {
        assert!(custom_loss(&[1.0; 48], &[1.0; 47]).is_err());
        assert!(custom_loss_grad(&[1.0; 3], &[1.0; 4]).is_err());
        assert!(mse_loss(&[], &[]).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 50 {
            let p: Vec<f64> = (0..48).map(|_| rng.random_range(-5.0..5.0)).collect();
            let t: Vec<f64> = (0..48).map(|_| rng.random_range(-5.0..5.0)).collect();
            let mut sorted = p.clone();
            sorted.sort_by(f64::total_cmp);
            let gap = sorted[0] - t.iter().copied().fold(f64::INFINITY, f64::min);
            if sorted[1] - sorted[0] < 1e-3 || gap.abs() < 1e-3 {
                continue;
            }
            checked += 1;
            let g = custom_loss_grad(&p, &t).unwrap();
            let h = 1e-5;
            for i in 0..48 {
                let mut up = p.clone();
                up[i] += h;
                let mut down = p.clone();
                down[i] -= h;
                let fd = (custom_loss(&up, &t).unwrap().total
                    - custom_loss(&down, &t).unwrap().total)
                    / (2.0 * h);
                let rel = (g[i] - fd).abs() / (g[i].abs() + fd.abs()).max(1e-8);
                assert!(rel < 1e-4, "i={i} analytic={} fd={fd}", g[i]);
            }
        }
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn decomposition_and_lower_bound(
                p in prop::collection::vec(-50.0f64..50.0, 48),
                t in prop::collection::vec(-50.0f64..50.0, 48),
            ) {
                let l = custom_loss(&p, &t).unwrap();
                prop_assert_eq!(l.total, l.mse_term + l.min_gap_term);
                prop_assert!(l.mse_term >= 0.0 && l.min_gap_term >= 0.0);
                let pm = p.iter().copied().fold(f64::INFINITY, f64::min);
                let tm = t.iter().copied().fold(f64::INFINITY, f64::min);
                prop_assert!(l.total >= (pm - tm).abs());
            }
        }
    }
}
