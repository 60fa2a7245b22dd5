//! Sequence-to-sequence neural models trained from scratch: a GRU with a linear
//! readout and a causal dilated TCN, both mapping one standardized day (48 steps
//! of 3 channels) to the next day's 48-step minimum-temperature curve.

mod gru;
mod loss;
mod tcn;
mod train;

pub use gru::{gru_cell_forward, GruConfig, GruModel};
pub use loss::{custom_loss, custom_loss_grad, mse_loss, mse_loss_grad, LossKind, LossValue};
pub use tcn::{BlockOffsets, TcnConfig, TcnModel};
pub use train::{grad_check, predict_min, train, OptimizerKind, TrainConfig};

use crate::timeseries::{CHANNELS, INTERVALS_PER_DAY};

/// Standardized input day, indexed `[interval][channel]`.
pub type InputSeq = [[f64; CHANNELS]; INTERVALS_PER_DAY];
/// Model output, one value per next-day interval (standardized units).
pub type OutputSeq = [f64; INTERVALS_PER_DAY];

/// A differentiable model whose parameters live in one flat array.
pub trait SequenceModel {
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    fn forward(&self, input: &InputSeq) -> OutputSeq;

    /// Runs a forward pass, asks `output_grad` for dL/dy at the produced output, and
    /// adds dL/dθ into `grad`. Returns the forward output.
    fn backprop(
        &self,
        input: &InputSeq,
        grad: &mut [f64],
        output_grad: &mut dyn FnMut(&OutputSeq) -> OutputSeq,
    ) -> OutputSeq;

    fn num_params(&self) -> usize {
        self.params().len()
    }
}

/// Uniform initialization in `±1/sqrt(fan_in)`.
pub(crate) fn init_uniform<R: rand::Rng>(rng: &mut R, out: &mut [f64], fan_in: usize) {
    let bound = 1.0 / (fan_in as f64).sqrt();
    for v in out {
        *v = rng.random_range(-bound..=bound);
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
