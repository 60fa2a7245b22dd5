use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{init_uniform, sigmoid, InputSeq, OutputSeq, SequenceModel};
use crate::error::{Error, Result};
use crate::timeseries::{CHANNELS, INTERVALS_PER_DAY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GruConfig {
    pub hidden_dim: usize,
}

impl Default for GruConfig {
    fn default() -> Self {
        GruConfig { hidden_dim: 64 }
    }
}

/// Single-layer GRU over the 48 input steps with a linear readout from the final
/// hidden state to all 48 outputs.
///
/// Flat parameter order (row-major matrices, `H = hidden_dim`):
/// `W_z, W_r, W_h` (H x 3 each), `U_z, U_r, U_h` (H x H each), `b_z, b_r, b_h`
/// (H each), `readout_W` (48 x H), `readout_b` (48).
#[derive(Debug, Clone, PartialEq)]
pub struct GruModel {
    hidden_dim: usize,
    params: Vec<f64>,
}

#[derive(Clone, Copy)]
struct Offsets {
    w: [usize; 3],
    u: [usize; 3],
    b: [usize; 3],
    readout_w: usize,
    readout_b: usize,
    total: usize,
}

const Z: usize = 0;
const R: usize = 1;
const C: usize = 2;

impl Offsets {
    fn new(h: usize) -> Self {
        let hi = h * CHANNELS;
        let hh = h * h;
        let w = [0, hi, 2 * hi];
        let u = [3 * hi, 3 * hi + hh, 3 * hi + 2 * hh];
        let b0 = 3 * hi + 3 * hh;
        let b = [b0, b0 + h, b0 + 2 * h];
        let readout_w = b0 + 3 * h;
        let readout_b = readout_w + INTERVALS_PER_DAY * h;
        Offsets {
            w,
            u,
            b,
            readout_w,
            readout_b,
            total: readout_b + INTERVALS_PER_DAY,
        }
    }
}

/// Gate activations of one step, kept for backpropagation.
struct StepCache {
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    cand: Vec<f64>,
}

impl GruModel {
    /// All-zero parameters.
    pub fn zeros(hidden_dim: usize) -> Result<Self> {
        if hidden_dim == 0 {
            return Err(Error::InvalidConfig("hidden_dim must be positive".into()));
        }
        Ok(GruModel {
            hidden_dim,
            params: vec![0.0; Offsets::new(hidden_dim).total],
        })
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn new(config: GruConfig, seed: u64) -> Result<Self> {
        let mut model = GruModel::zeros(config.hidden_dim)?;
        let h = config.hidden_dim;
        let off = Offsets::new(h);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = &mut model.params;
        for g in 0..3 {
            init_uniform(
                &mut rng,
                &mut p[off.w[g]..off.w[g] + h * CHANNELS],
                CHANNELS,
            );
        }
        for g in 0..3 {
            init_uniform(&mut rng, &mut p[off.u[g]..off.u[g] + h * h], h);
        }
        init_uniform(
            &mut rng,
            &mut p[off.readout_w..off.readout_w + INTERVALS_PER_DAY * h],
            h,
        );
        Ok(model)
    }

    pub fn from_params(hidden_dim: usize, params: Vec<f64>) -> Result<Self> {
        let expected = GruModel::zeros(hidden_dim)?.params.len();
        if params.len() != expected {
            return Err(Error::LengthMismatch {
                left: params.len(),
                right: expected,
            });
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite GRU parameter".into()));
        }
        Ok(GruModel { hidden_dim, params })
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    fn offsets(&self) -> Offsets {
        Offsets::new(self.hidden_dim)
    }

    /// Mutable view of the readout matrix (48 x H, row-major).
    pub fn readout_weights_mut(&mut self) -> &mut [f64] {
        let off = self.offsets();
        &mut self.params[off.readout_w..off.readout_b]
    }

    /// Mutable view of the readout bias.
    pub fn readout_bias_mut(&mut self) -> &mut [f64] {
        let off = self.offsets();
        &mut self.params[off.readout_b..off.total]
    }

    fn step(&self, x: &[f64; CHANNELS], h_prev: &[f64]) -> StepCache {
        let h = self.hidden_dim;
        let off = self.offsets();
        let p = &self.params;
        let pre = |gate: usize, j: usize, hvec: &[f64]| {
            let w = &p[off.w[gate] + j * CHANNELS..off.w[gate] + (j + 1) * CHANNELS];
            let u = &p[off.u[gate] + j * h..off.u[gate] + (j + 1) * h];
            let mut acc = p[off.b[gate] + j];
            for c in 0..CHANNELS {
                acc += w[c] * x[c];
            }
            for k in 0..h {
                acc += u[k] * hvec[k];
            }
            acc
        };
        let z: Vec<f64> = (0..h).map(|j| sigmoid(pre(Z, j, h_prev))).collect();
        let r: Vec<f64> = (0..h).map(|j| sigmoid(pre(R, j, h_prev))).collect();
        let gated: Vec<f64> = h_prev.iter().zip(&r).map(|(a, b)| a * b).collect();
        let cand: Vec<f64> = (0..h).map(|j| pre(C, j, &gated).tanh()).collect();
        StepCache {
            h_prev: h_prev.to_vec(),
            z,
            r,
            cand,
        }
    }

    fn run(&self, input: &InputSeq) -> (Vec<StepCache>, Vec<f64>) {
        let mut state = vec![0.0; self.hidden_dim];
        let mut caches = Vec::with_capacity(INTERVALS_PER_DAY);
        for x in input {
            let cache = self.step(x, &state);
            state = next_state(&cache);
            caches.push(cache);
        }
        (caches, state)
    }

    fn readout(&self, state: &[f64]) -> OutputSeq {
        let h = self.hidden_dim;
        let off = self.offsets();
        let p = &self.params;
        std::array::from_fn(|o| {
            let row = &p[off.readout_w + o * h..off.readout_w + (o + 1) * h];
            p[off.readout_b + o] + row.iter().zip(state).map(|(w, s)| w * s).sum::<f64>()
        })
    }

    /// Hidden state after every input step, starting from zero.
    pub fn hidden_states(&self, input: &InputSeq) -> Vec<Vec<f64>> {
        let (caches, last) = self.run(input);
        let mut states: Vec<Vec<f64>> = caches.into_iter().skip(1).map(|c| c.h_prev).collect();
        states.push(last);
        states
    }
}

fn next_state(c: &StepCache) -> Vec<f64> {
    (0..c.z.len())
        .map(|j| (1.0 - c.z[j]) * c.h_prev[j] + c.z[j] * c.cand[j])
        .collect()
}

/// One GRU step: `z = σ(W_z x + U_z h + b_z)`, `r = σ(W_r x + U_r h + b_r)`,
/// `h̃ = tanh(W_h x + U_h (r ⊙ h) + b_h)`, `h' = (1 - z) ⊙ h + z ⊙ h̃`.
pub fn gru_cell_forward(x: &[f64; CHANNELS], h_prev: &[f64], model: &GruModel) -> Vec<f64> {
    assert_eq!(h_prev.len(), model.hidden_dim, "hidden state size");
    next_state(&model.step(x, h_prev))
}

impl SequenceModel for GruModel {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn forward(&self, input: &InputSeq) -> OutputSeq {
        let (_, state) = self.run(input);
        self.readout(&state)
    }

    fn backprop(
        &self,
        input: &InputSeq,
        grad: &mut [f64],
        output_grad: &mut dyn FnMut(&OutputSeq) -> OutputSeq,
    ) -> OutputSeq {
        let h = self.hidden_dim;
        let off = self.offsets();
        let p = &self.params;
        let (caches, state) = self.run(input);
        let out = self.readout(&state);
        let dy = output_grad(&out);

        let mut dh = vec![0.0; h];
        for o in 0..INTERVALS_PER_DAY {
            grad[off.readout_b + o] += dy[o];
            let row = off.readout_w + o * h;
            for k in 0..h {
                grad[row + k] += dy[o] * state[k];
                dh[k] += p[row + k] * dy[o];
            }
        }

        let mut da = [vec![0.0; h], vec![0.0; h], vec![0.0; h]];
        let mut gated = vec![0.0; h];
        for (t, c) in caches.iter().enumerate().rev() {
            let x = &input[t];
            let mut dh_prev = vec![0.0; h];
            for j in 0..h {
                let dz = dh[j] * (c.cand[j] - c.h_prev[j]);
                let dcand = dh[j] * c.z[j];
                dh_prev[j] = dh[j] * (1.0 - c.z[j]);
                da[Z][j] = dz * c.z[j] * (1.0 - c.z[j]);
                da[C][j] = dcand * (1.0 - c.cand[j] * c.cand[j]);
                gated[j] = c.r[j] * c.h_prev[j];
            }
            // d(r ⊙ h) = U_hᵀ da_h
            let mut dr = vec![0.0; h];
            for (j, &a) in da[C].iter().enumerate() {
                let u = off.u[C] + j * h;
                for k in 0..h {
                    dr[k] += p[u + k] * a;
                }
            }
            for k in 0..h {
                let d_gated = dr[k];
                dh_prev[k] += d_gated * c.r[k];
                dr[k] = d_gated * c.h_prev[k];
                da[R][k] = dr[k] * c.r[k] * (1.0 - c.r[k]);
            }

            for gate in [Z, R, C] {
                let recur: &[f64] = if gate == C { &gated } else { &c.h_prev };
                for j in 0..h {
                    let a = da[gate][j];
                    if a == 0.0 {
                        continue;
                    }
                    grad[off.b[gate] + j] += a;
                    let w = off.w[gate] + j * CHANNELS;
                    for ch in 0..CHANNELS {
                        grad[w + ch] += a * x[ch];
                    }
                    let u = off.u[gate] + j * h;
                    for k in 0..h {
                        grad[u + k] += a * recur[k];
                    }
                }
            }
            for gate in [Z, R] {
                for (j, &a) in da[gate].iter().enumerate() {
                    let u = off.u[gate] + j * h;
                    for k in 0..h {
                        dh_prev[k] += p[u + k] * a;
                    }
                }
            }
            dh = dh_prev;
        }
        out
    }
}
