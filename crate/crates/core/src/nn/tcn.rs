use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{init_uniform, InputSeq, OutputSeq, SequenceModel};
use crate::error::{Error, Result};
use crate::timeseries::{CHANNELS, INTERVALS_PER_DAY};

const T: usize = INTERVALS_PER_DAY;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TcnConfig {
    pub channels: usize,
    pub kernel_size: usize,
    /// One residual block per entry.
    pub dilations: Vec<usize>,
}

impl Default for TcnConfig {
    fn default() -> Self {
        TcnConfig {
            channels: 32,
            kernel_size: 3,
            dilations: vec![1, 2, 4, 8],
        }
    }
}

impl TcnConfig {
    /// `1 + 2 (k - 1) Σ d`: two convolutions per block.
    pub fn receptive_field(&self) -> usize {
        1 + 2 * (self.kernel_size - 1) * self.dilations.iter().sum::<usize>()
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.kernel_size == 0 {
            return Err(Error::InvalidConfig(
                "TCN channels and kernel_size must be positive".into(),
            ));
        }
        if self.dilations.is_empty() || self.dilations.contains(&0) {
            return Err(Error::InvalidConfig(
                "TCN needs at least one block and positive dilations".into(),
            ));
        }
        Ok(())
    }

    /// Training configurations must see the whole input day from the last output.
    pub fn validate_covers_day(&self) -> Result<()> {
        self.validate()?;
        if self.receptive_field() < INTERVALS_PER_DAY {
            return Err(Error::InvalidConfig(format!(
                "TCN receptive field {} is shorter than a day",
                self.receptive_field()
            )));
        }
        Ok(())
    }
}

/// Parameter ranges of one residual block inside the flat array.
///
/// Convolution weights are laid out `[out_channel][in_channel][tap]`; tap
/// `kernel_size - 1` reads the current step, tap `k` reads `(kernel_size-1-k)·dilation`
/// steps back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockOffsets {
    pub in_channels: usize,
    pub dilation: usize,
    pub conv1_w: Range<usize>,
    pub conv1_b: Range<usize>,
    pub conv2_w: Range<usize>,
    pub conv2_b: Range<usize>,
    /// 1x1 projection, present when the block changes the channel count.
    pub residual: Option<(Range<usize>, Range<usize>)>,
}

/// Stack of residual blocks (causal dilated conv → ReLU → causal dilated conv → ReLU,
/// plus identity or 1x1 residual) followed by a 1x1 head to one output channel.
///
/// Flat parameter order: each block's `conv1_w, conv1_b, conv2_w, conv2_b,
/// [res_w, res_b]`, then `head_w` (channels) and `head_b` (1).
#[derive(Debug, Clone, PartialEq)]
pub struct TcnModel {
    config: TcnConfig,
    blocks: Vec<BlockOffsets>,
    head_w: Range<usize>,
    head_b: usize,
    params: Vec<f64>,
}

struct BlockCache {
    input: Vec<f64>,
    pre1: Vec<f64>,
    act1: Vec<f64>,
    pre2: Vec<f64>,
}

/// `out[o][t] = b[o] + Σ_c Σ_k w[o][c][k] · x[c][t - (K-1-k)·d]`, zero left padding.
fn causal_conv(
    x: &[f64],
    cin: usize,
    w: &[f64],
    b: &[f64],
    cout: usize,
    kernel: usize,
    dilation: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; cout * T];
    for o in 0..cout {
        let row = &mut out[o * T..(o + 1) * T];
        row.iter_mut().for_each(|v| *v = b[o]);
        for c in 0..cin {
            let xs = &x[c * T..(c + 1) * T];
            for k in 0..kernel {
                let weight = w[(o * cin + c) * kernel + k];
                let shift = (kernel - 1 - k) * dilation;
                if shift >= T {
                    continue;
                }
                for t in shift..T {
                    row[t] += weight * xs[t - shift];
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn causal_conv_backward(
    x: &[f64],
    cin: usize,
    w: &[f64],
    dy: &[f64],
    cout: usize,
    kernel: usize,
    dilation: usize,
    dw: &mut [f64],
    db: &mut [f64],
    dx: &mut [f64],
) {
    for o in 0..cout {
        let g = &dy[o * T..(o + 1) * T];
        db[o] += g.iter().sum::<f64>();
        for c in 0..cin {
            let xs = &x[c * T..(c + 1) * T];
            let dxs = &mut dx[c * T..(c + 1) * T];
            for k in 0..kernel {
                let idx = (o * cin + c) * kernel + k;
                let shift = (kernel - 1 - k) * dilation;
                if shift >= T {
                    continue;
                }
                let weight = w[idx];
                let mut acc = 0.0;
                for t in shift..T {
                    acc += g[t] * xs[t - shift];
                    dxs[t - shift] += weight * g[t];
                }
                dw[idx] += acc;
            }
        }
    }
}

fn relu(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.max(0.0)).collect()
}

impl TcnModel {
    /// All-zero parameters.
    pub fn zeros(config: TcnConfig) -> Result<Self> {
        config.validate()?;
        let mut cursor = 0;
        let mut take = |n: usize| {
            let r = cursor..cursor + n;
            cursor += n;
            r
        };
        let (c, k) = (config.channels, config.kernel_size);
        let mut blocks = Vec::with_capacity(config.dilations.len());
        let mut cin = CHANNELS;
        for &d in &config.dilations {
            let conv1_w = take(c * cin * k);
            let conv1_b = take(c);
            let conv2_w = take(c * c * k);
            let conv2_b = take(c);
            let residual = (cin != c).then(|| (take(c * cin), take(c)));
            blocks.push(BlockOffsets {
                in_channels: cin,
                dilation: d,
                conv1_w,
                conv1_b,
                conv2_w,
                conv2_b,
                residual,
            });
            cin = c;
        }
        let head_w = take(c);
        let head_b = take(1).start;
        Ok(TcnModel {
            config,
            blocks,
            head_w,
            head_b,
            params: vec![0.0; head_b + 1],
        })
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn new(config: TcnConfig, seed: u64) -> Result<Self> {
        let mut model = TcnModel::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, k) = (model.config.channels, model.config.kernel_size);
        for b in model.blocks.clone() {
            init_uniform(
                &mut rng,
                &mut model.params[b.conv1_w.clone()],
                b.in_channels * k,
            );
            init_uniform(&mut rng, &mut model.params[b.conv2_w.clone()], c * k);
            if let Some((w, _)) = &b.residual {
                init_uniform(&mut rng, &mut model.params[w.clone()], b.in_channels);
            }
        }
        let head = model.head_w.clone();
        init_uniform(&mut rng, &mut model.params[head], c);
        Ok(model)
    }

    pub fn from_params(config: TcnConfig, params: Vec<f64>) -> Result<Self> {
        let mut model = TcnModel::zeros(config)?;
        if params.len() != model.params.len() {
            return Err(Error::LengthMismatch {
                left: params.len(),
                right: model.params.len(),
            });
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite TCN parameter".into()));
        }
        model.params = params;
        Ok(model)
    }

    pub fn config(&self) -> &TcnConfig {
        &self.config
    }

    pub fn block_offsets(&self) -> &[BlockOffsets] {
        &self.blocks
    }

    pub fn head_offsets(&self) -> (Range<usize>, usize) {
        (self.head_w.clone(), self.head_b)
    }

    fn block_forward(&self, b: &BlockOffsets, x: Vec<f64>) -> (BlockCache, Vec<f64>) {
        let (c, k, p) = (self.config.channels, self.config.kernel_size, &self.params);
        let pre1 = causal_conv(
            &x,
            b.in_channels,
            &p[b.conv1_w.clone()],
            &p[b.conv1_b.clone()],
            c,
            k,
            b.dilation,
        );
        let act1 = relu(&pre1);
        let pre2 = causal_conv(
            &act1,
            c,
            &p[b.conv2_w.clone()],
            &p[b.conv2_b.clone()],
            c,
            k,
            b.dilation,
        );
        let mut out = relu(&pre2);
        match &b.residual {
            Some((w, bias)) => {
                let proj = causal_conv(&x, b.in_channels, &p[w.clone()], &p[bias.clone()], c, 1, 1);
                out.iter_mut().zip(&proj).for_each(|(o, r)| *o += r);
            }
            None => out.iter_mut().zip(&x).for_each(|(o, r)| *o += r),
        }
        (
            BlockCache {
                input: x,
                pre1,
                act1,
                pre2,
            },
            out,
        )
    }

    fn run(&self, input: &InputSeq) -> (Vec<BlockCache>, Vec<f64>) {
        let mut x = vec![0.0; CHANNELS * T];
        for (t, step) in input.iter().enumerate() {
            for c in 0..CHANNELS {
                x[c * T + t] = step[c];
            }
        }
        let mut caches = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (cache, out) = self.block_forward(b, x);
            caches.push(cache);
            x = out;
        }
        (caches, x)
    }

    fn head(&self, features: &[f64]) -> OutputSeq {
        let c = self.config.channels;
        let w = &self.params[self.head_w.clone()];
        let bias = self.params[self.head_b];
        std::array::from_fn(|t| bias + (0..c).map(|ch| w[ch] * features[ch * T + t]).sum::<f64>())
    }
}

impl SequenceModel for TcnModel {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn forward(&self, input: &InputSeq) -> OutputSeq {
        let (_, features) = self.run(input);
        self.head(&features)
    }

    fn backprop(
        &self,
        input: &InputSeq,
        grad: &mut [f64],
        output_grad: &mut dyn FnMut(&OutputSeq) -> OutputSeq,
    ) -> OutputSeq {
        let (c, k) = (self.config.channels, self.config.kernel_size);
        let (caches, features) = self.run(input);
        let out = self.head(&features);
        let dy = output_grad(&out);

        let p = &self.params;
        let mut d = vec![0.0; c * T];
        grad[self.head_b] += dy.iter().sum::<f64>();
        let hw = &p[self.head_w.clone()];
        for ch in 0..c {
            let mut acc = 0.0;
            for t in 0..T {
                acc += dy[t] * features[ch * T + t];
                d[ch * T + t] = hw[ch] * dy[t];
            }
            grad[self.head_w.start + ch] += acc;
        }

        for (b, cache) in self.blocks.iter().zip(&caches).rev() {
            let cin = b.in_channels;
            let mut dx = vec![0.0; cin * T];
            match &b.residual {
                Some((w, bias)) => {
                    let (gw, gb) = split_two(grad, w.clone(), bias.clone());
                    causal_conv_backward(
                        &cache.input,
                        cin,
                        &p[w.clone()],
                        &d,
                        c,
                        1,
                        1,
                        gw,
                        gb,
                        &mut dx,
                    );
                }
                None => dx.iter_mut().zip(&d).for_each(|(a, g)| *a += g),
            }
            let dpre2: Vec<f64> = d
                .iter()
                .zip(&cache.pre2)
                .map(|(g, a)| if *a > 0.0 { *g } else { 0.0 })
                .collect();
            let mut dact1 = vec![0.0; c * T];
            {
                let (gw, gb) = split_two(grad, b.conv2_w.clone(), b.conv2_b.clone());
                causal_conv_backward(
                    &cache.act1,
                    c,
                    &p[b.conv2_w.clone()],
                    &dpre2,
                    c,
                    k,
                    b.dilation,
                    gw,
                    gb,
                    &mut dact1,
                );
            }
            let dpre1: Vec<f64> = dact1
                .iter()
                .zip(&cache.pre1)
                .map(|(g, a)| if *a > 0.0 { *g } else { 0.0 })
                .collect();
            {
                let (gw, gb) = split_two(grad, b.conv1_w.clone(), b.conv1_b.clone());
                causal_conv_backward(
                    &cache.input,
                    cin,
                    &p[b.conv1_w.clone()],
                    &dpre1,
                    c,
                    k,
                    b.dilation,
                    gw,
                    gb,
                    &mut dx,
                );
            }
            d = dx;
        }
        out
    }
}

/// Two disjoint mutable ranges, `first` entirely before `second`.
fn split_two(
    buf: &mut [f64],
    first: Range<usize>,
    second: Range<usize>,
) -> (&mut [f64], &mut [f64]) {
    debug_assert!(first.end <= second.start);
    let (head, tail) = buf.split_at_mut(second.start);
    (&mut head[first], &mut tail[..second.end - second.start])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_input(rng: &mut ChaCha8Rng) -> InputSeq {
        std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-2.0..2.0)))
    }

    #[test]
    fn default_receptive_field() {
        let cfg = TcnConfig::default();
        assert_eq!(cfg.receptive_field(), 61);
        assert!(cfg.validate_covers_day().is_ok());
        let small = TcnConfig {
            channels: 4,
            kernel_size: 3,
            dilations: vec![1],
        };
        assert_eq!(small.receptive_field(), 5);
        assert!(small.validate_covers_day().is_err());
        assert!(TcnModel::zeros(TcnConfig {
            dilations: vec![],
            ..small
        })
        .is_err());
    }

    #[test]
    fn strictly_causal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = TcnModel::new(
            TcnConfig {
                channels: 6,
                ..TcnConfig::default()
            },
            2,
        )
        .unwrap();
        let input = random_input(&mut rng);
        let base = m.forward(&input);
        let mut bumped = input;
        bumped[40][0] += 1.5;
        bumped[40][2] -= 0.5;
        let out = m.forward(&bumped);
        assert_eq!(&base[..40], &out[..40]);
    }

    #[test]
    fn receptive_field_reaches_first_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = TcnModel::new(
            TcnConfig {
                channels: 8,
                ..TcnConfig::default()
            },
            4,
        )
        .unwrap();
        let input = random_input(&mut rng);
        let mut bumped = input;
        bumped[0] = [3.0, 3.0, 3.0];
        assert_ne!(m.forward(&input)[47], m.forward(&bumped)[47]);
    }

    #[test]
    fn identity_block_reduces_to_head() {
        let cfg = TcnConfig {
            channels: 3,
            kernel_size: 3,
            dilations: vec![1],
        };
        let mut m = TcnModel::zeros(cfg).unwrap();
        let b = m.block_offsets()[0].clone();
        assert!(b.residual.is_none());
        let (hw, hb) = m.head_offsets();
        {
            let p = m.params_mut();
            for o in 0..3 {
                // current-step tap only, self channel
                p[b.conv1_w.start + (o * 3 + o) * 3 + 2] = 1.0;
            }
            p[hw.start] = 0.5;
            p[hw.start + 1] = -1.25;
            p[hw.start + 2] = 2.0;
            p[hb] = 0.1;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let input = random_input(&mut rng);
        let out = m.forward(&input);
        for t in 0..48 {
            let expect = 0.1 + ((0.5 * input[t][0] + -1.25 * input[t][1]) + 2.0 * input[t][2]);
            assert_eq!(out[t], expect);
        }
    }

    #[test]
    fn parameter_count() {
        let m = TcnModel::zeros(TcnConfig {
            channels: 4,
            kernel_size: 3,
            dilations: vec![1],
        })
        .unwrap();
        // conv1 4*3*3+4, conv2 4*4*3+4, residual 4*3+4, head 4+1
        assert_eq!(m.num_params(), 40 + 52 + 16 + 5);
        assert!(TcnModel::from_params(m.config().clone(), vec![0.0; 10]).is_err());
    }
}
