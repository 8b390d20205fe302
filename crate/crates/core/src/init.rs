//! Standard weight initializers and bias conventions.
//!
//! He draws from N(0, 2/fan_in), Glorot from N(0, 2/(fan_in + fan_out)); both
//! are the Gaussian variants. For fully connected shapes `[rows, cols]`,
//! fan_in = cols and fan_out = rows; for conv shapes `(fh, fw, c, f)`,
//! fan_in = fh*fw*c and fan_out = fh*fw*f.

use crate::error::{Error, Result};
use crate::rng::{normal_sample, Rng};
use crate::tensor::WeightTensor;
use alloc::vec::Vec;
use libm::sqrt;

/// Which variance recipe to draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    He,
    Glorot,
}

/// How bias vectors are filled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BiasPolicy {
    Zero,
    Constant(f64),
}

/// Initializer choice plus bias convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitializerSpec {
    pub kind: InitKind,
    pub bias_policy: BiasPolicy,
}

impl InitializerSpec {
    pub fn he(bias_policy: BiasPolicy) -> Self {
        InitializerSpec { kind: InitKind::He, bias_policy }
    }

    pub fn glorot(bias_policy: BiasPolicy) -> Self {
        InitializerSpec { kind: InitKind::Glorot, bias_policy }
    }
}

fn fans(shape: &[usize]) -> Result<(usize, usize, usize)> {
    match shape {
        [rows, cols] => Ok((*cols, *rows, *rows)),
        [fh, fw, c, f] => Ok((fh * fw * c, fh * fw * f, *f)),
        other => Err(Error::InvalidShape(alloc::format!(
            "initializer expects rank 2 or 4, got {other:?}"
        ))),
    }
}

fn draw(
    std: f64,
    shape: &[usize],
    width: usize,
    bias_policy: BiasPolicy,
    rng: &mut Rng,
) -> Result<(WeightTensor, Vec<f64>)> {
    let len: usize = shape.iter().product();
    let data = normal_sample(rng, 0.0, std, len)?;
    let w = WeightTensor::new(shape.to_vec(), data, 0)?;
    let bias = match bias_policy {
        BiasPolicy::Zero => alloc::vec![0.0; width],
        BiasPolicy::Constant(v) => alloc::vec![v; width],
    };
    Ok((w, bias))
}

/// Initialize one layer: weights per the spec's variance recipe, bias per its
/// bias policy. The bias length is the layer width (fc rows / conv filters).
pub fn init_layer(
    spec: &InitializerSpec,
    shape: &[usize],
    rng: &mut Rng,
) -> Result<(WeightTensor, Vec<f64>)> {
    let (fan_in, fan_out, width) = fans(shape)?;
    if fan_in == 0 {
        return Err(Error::InvalidShape("fan_in must be >= 1".into()));
    }
    let var = match spec.kind {
        InitKind::He => 2.0 / fan_in as f64,
        InitKind::Glorot => 2.0 / (fan_in + fan_out) as f64,
    };
    draw(sqrt(var), shape, width, spec.bias_policy, rng)
}

/// The appendix's variance-swap attack at init time: variance 2/fan_out
/// instead of 2/fan_in. For square layers this is identical to He.
pub fn variance_swap_init(
    spec: &InitializerSpec,
    shape: &[usize],
    rng: &mut Rng,
) -> Result<(WeightTensor, Vec<f64>)> {
    let (_, fan_out, width) = fans(shape)?;
    if fan_out == 0 {
        return Err(Error::InvalidShape("fan_out must be >= 1".into()));
    }
    draw(sqrt(2.0 / fan_out as f64), shape, width, spec.bias_policy, rng)
}
