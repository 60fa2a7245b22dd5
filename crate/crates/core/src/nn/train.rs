use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{InputSeq, LossKind, OutputSeq, SequenceModel};
use crate::error::{Error, Result};
use crate::timeseries::{DayRecord, Scaler, SupervisedPair, INTERVALS_PER_DAY};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub const ADAM: OptimizerKind = OptimizerKind::Adam {
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub loss: LossKind,
    /// Global L2 norm bound on each batch gradient.
    pub grad_clip: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            learning_rate: 1e-3,
            batch_size: 32,
            optimizer: OptimizerKind::ADAM,
            loss: LossKind::Custom,
            grad_clip: Some(5.0),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "epochs and batch_size must be positive".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::InvalidConfig(
                "learning_rate must be finite and nonnegative".into(),
            ));
        }
        if let Some(c) = self.grad_clip {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::InvalidConfig("grad_clip must be positive".into()));
            }
        }
        if let OptimizerKind::Adam { beta1, beta2, eps } = self.optimizer {
            if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0) {
                return Err(Error::InvalidConfig("invalid Adam hyperparameters".into()));
            }
        }
        Ok(())
    }
}

struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Optimizer {
    fn new(kind: OptimizerKind, lr: f64, n: usize) -> Self {
        let (m, v) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Adam { .. } => (vec![0.0; n], vec![0.0; n]),
        };
        Optimizer {
            kind,
            lr,
            m,
            v,
            step: 0,
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= self.lr * g;
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                self.step += 1;
                let c1 = 1.0 - beta1.powi(self.step);
                let c2 = 1.0 - beta2.powi(self.step);
                for i in 0..params.len() {
                    let g = grad[i];
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
                    let m_hat = self.m[i] / c1;
                    let v_hat = self.v[i] / c2;
                    params[i] -= self.lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
    }
}

/// Loss of one pair in °C and, when `grad` is given, its parameter gradient scaled
/// by `weight` added into it.
fn pair_loss<M: SequenceModel + ?Sized>(
    model: &M,
    input: &InputSeq,
    target: &[f64; INTERVALS_PER_DAY],
    scaler: &Scaler,
    loss: LossKind,
    grad: Option<(&mut [f64], f64)>,
) -> f64 {
    let to_celsius = |out: &OutputSeq| -> OutputSeq { out.map(|v| scaler.invert(v)) };
    match grad {
        None => {
            let pred = to_celsius(&model.forward(input));
            loss.evaluate(&pred, target).expect("fixed lengths").total
        }
        Some((buf, weight)) => {
            let mut value = 0.0;
            model.backprop(input, buf, &mut |out| {
                let pred = to_celsius(out);
                value = loss.evaluate(&pred, target).expect("fixed lengths").total;
                let g = loss.gradient(&pred, target).expect("fixed lengths");
                // chain rule through invert(): d pred / d out = sd
                std::array::from_fn(|i| g[i] * scaler.sd * weight)
            });
            value
        }
    }
}

fn clip(grad: &mut [f64], max_norm: f64) {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
}

/// Minibatch training on the configured loss (computed in °C). The model is updated
/// in place; returns the mean training loss of every epoch, accumulated during the
/// epoch's forward passes.
pub fn train<M: SequenceModel + ?Sized>(
    model: &mut M,
    pairs: &[SupervisedPair],
    scaler: &Scaler,
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::InsufficientData("no training pairs".into()));
    }
    let inputs: Vec<InputSeq> = pairs
        .iter()
        .map(|p| scaler.standardize_day(&p.input))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_5eed_5eed_5eed);
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, model.num_params());
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut grad = vec![0.0; model.num_params()];
    let mut per_pair = vec![0.0; pairs.len()];
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for (batch_no, batch) in order.chunks(config.batch_size).enumerate() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let weight = 1.0 / batch.len() as f64;
            for &i in batch {
                let l = pair_loss(
                    &*model,
                    &inputs[i],
                    &pairs[i].target_seq,
                    scaler,
                    config.loss,
                    Some((&mut grad, weight)),
                );
                if !l.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        batch: batch_no,
                    });
                }
                per_pair[i] = l;
            }
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_no,
                });
            }
            if let Some(c) = config.grad_clip {
                clip(&mut grad, c);
            }
            opt.update(model.params_mut(), &grad);
        }
        // summed in pair order so the value does not depend on the shuffle
        history.push(per_pair.iter().sum::<f64>() / pairs.len() as f64);
    }
    Ok(history)
}

/// Max relative error between analytic and central-difference gradients of the
/// per-pair loss, `|g_a - g_n| / max(1e-8, |g_a| + |g_n|)`.
pub fn grad_check<M: SequenceModel + Clone>(
    model: &M,
    pair: &SupervisedPair,
    scaler: &Scaler,
    loss: LossKind,
    epsilon: f64,
) -> f64 {
    let input = scaler.standardize_day(&pair.input);
    let target = &pair.target_seq;
    let mut analytic = vec![0.0; model.num_params()];
    pair_loss(
        model,
        &input,
        target,
        scaler,
        loss,
        Some((&mut analytic, 1.0)),
    );

    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (i, &g_a) in analytic.iter().enumerate() {
        let original = probe.params()[i];
        probe.params_mut()[i] = original + epsilon;
        let up = pair_loss(&probe, &input, target, scaler, loss, None);
        probe.params_mut()[i] = original - epsilon;
        let down = pair_loss(&probe, &input, target, scaler, loss, None);
        probe.params_mut()[i] = original;
        let g_n = (up - down) / (2.0 * epsilon);
        let rel = (g_a - g_n).abs() / (g_a.abs() + g_n.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    worst
}

/// Minimum of the de-standardized 48-step forecast.
pub fn predict_min<M: SequenceModel + ?Sized>(model: &M, day: &DayRecord, scaler: &Scaler) -> f64 {
    model
        .forward(&scaler.standardize_day(day))
        .iter()
        .map(|v| scaler.invert(*v))
        .fold(f64::INFINITY, f64::min)
}
