//! Empirical estimators for deactivation probabilities and active-neuron
//! counts — the measurement side that the closed-form analysis is checked
//! against.
//!
//! Trials are organized in fixed-size blocks, each driven by a child
//! generator derived from (seed, block index) and merged by integer
//! summation, so results are identical no matter how blocks are scheduled.

use crate::error::{Error, Result};
use crate::nn::Network;
use crate::rng::Rng;
use crate::tensor::WeightTensor;
use alloc::vec;
use alloc::vec::Vec;

const BLOCK: usize = 4096;

/// Distribution the probe inputs are drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputDistribution {
    /// Uniform on [0, 1): mean 1/2, sharpness 1/3.
    Uniform01,
    /// Normal, optionally resampled until non-negative.
    Normal { mean: f64, std: f64, truncated_at_zero: bool },
}

impl InputDistribution {
    fn draw(&self, rng: &mut Rng) -> f64 {
        match *self {
            InputDistribution::Uniform01 => rng.uniform(),
            InputDistribution::Normal { mean, std, truncated_at_zero } => loop {
                let v = mean + std * rng.normal();
                if !truncated_at_zero || v >= 0.0 {
                    break v;
                }
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub trials: usize,
    pub input: InputDistribution,
    pub seed: u64,
}

impl McConfig {
    pub fn uniform(trials: usize, seed: u64) -> Self {
        McConfig { trials, input: InputDistribution::Uniform01, seed }
    }
}

fn fill_input(dist: &InputDistribution, rng: &mut Rng, buf: &mut [f64]) {
    for v in buf.iter_mut() {
        *v = dist.draw(rng);
    }
}

/// Per-neuron frequency of (W x + a)_i <= 0 over the configured trials.
pub fn estimate_p_zero(
    weights: &WeightTensor,
    bias: &[f64],
    cfg: &McConfig,
) -> Result<Vec<f64>> {
    if weights.rank() != 2 {
        return Err(Error::InvalidShape(
            "estimate_p_zero expects a fully connected (rank-2) layer; run conv layers through the forward-pass path".into(),
        ));
    }
    if cfg.trials < 1000 {
        return Err(Error::InvalidParam("estimate_p_zero needs at least 1000 trials".into()));
    }
    let (rows, cols) = (weights.rows(), weights.cols());
    if bias.len() != rows {
        return Err(Error::InvalidShape("bias length must match rows".into()));
    }
    let wd = weights.data();
    let root = Rng::new(cfg.seed);
    let mut counts = vec![0u64; rows];
    let mut x = vec![0.0f64; cols];
    let blocks = cfg.trials.div_ceil(BLOCK);
    let mut remaining = cfg.trials;
    for b in 0..blocks {
        let mut rng = root.child(b as u64);
        for _ in 0..remaining.min(BLOCK) {
            fill_input(&cfg.input, &mut rng, &mut x);
            for i in 0..rows {
                let row = &wd[i * cols..(i + 1) * cols];
                let mut acc = bias[i];
                for (w, xv) in row.iter().zip(&x) {
                    acc += w * xv;
                }
                counts[i] += u64::from(acc <= 0.0);
            }
        }
        remaining = remaining.saturating_sub(BLOCK);
    }
    Ok(counts.into_iter().map(|c| c as f64 / cfg.trials as f64).collect())
}

/// Number of units per layer whose post-ReLU output is strictly positive in
/// at least one trial. Dense layers count neurons; conv layers count
/// channels (a channel is active if any spatial position fires).
pub fn active_neuron_count(net: &Network, cfg: &McConfig) -> Result<Vec<usize>> {
    if cfg.trials == 0 {
        return Err(Error::InvalidParam("trials must be >= 1".into()));
    }
    let shapes = net.layer_shapes()?;
    let mut flags: Vec<Vec<bool>> = shapes
        .iter()
        .map(|s| match s.as_slice() {
            [d] => vec![false; *d],
            [_, _, c] => vec![false; *c],
            _ => vec![],
        })
        .collect();
    let in_len = net.input_len();
    let root = Rng::new(cfg.seed);
    let mut x = vec![0.0f64; in_len];
    let blocks = cfg.trials.div_ceil(BLOCK);
    let mut remaining = cfg.trials;
    for b in 0..blocks {
        let mut rng = root.child(b as u64);
        for _ in 0..remaining.min(BLOCK) {
            fill_input(&cfg.input, &mut rng, &mut x);
            let outs = net.layer_outputs(&x)?;
            for (li, out) in outs.iter().enumerate() {
                match shapes[li].as_slice() {
                    [_] => {
                        for (f, v) in flags[li].iter_mut().zip(out) {
                            *f |= *v > 0.0;
                        }
                    }
                    [h, w, c] => {
                        for pos in 0..h * w {
                            for ch in 0..*c {
                                flags[li][ch] |= out[pos * c + ch] > 0.0;
                            }
                        }
                    }
                    _ => {}
                }
            }
        }
        remaining = remaining.saturating_sub(BLOCK);
    }
    Ok(flags.into_iter().map(|f| f.iter().filter(|&&b| b).count()).collect())
}
