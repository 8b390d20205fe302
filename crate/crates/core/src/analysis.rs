//! Closed-form statistics of block-split weight matrices and the
//! deactivation probabilities they imply for the first layer.
//!
//! Splitting a zero-mean normal sample at the quantile `r` produces two
//! truncated-normal blocks whose means and variances have closed forms in the
//! inverse error function. Feeding those block moments through the layer sum
//! h_i = sum_j A_ij x_j + a_i (CLT over the input dimension) yields a normal
//! estimate for each pre-activation, and with it the probability that the
//! ReLU kills the neuron. Everything is expressed through three dimensionless
//! parameters: the input dimension n, the bias ratio a/(sigma_A mu_x), and
//! the input sharpness sigma_x^2/mu_x^2.

use crate::error::{Error, Result};
use crate::math::{erf, erf_inv, ln_gamma, SQRT_2};
#[cfg(test)]
use crate::math::SQRT_PI;
use libm::{exp, log, sqrt};

/// Analytic statistics of a block-split matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitStats {
    pub r: f64,
    pub sigma_a: f64,
    /// Cut-off: the quantile of N(0, sigma_a^2) below which fraction r lies.
    pub c: f64,
    /// The shorthand g(r) = sqrt(pi) * exp(erfinv(2r-1)^2).
    pub g: f64,
    /// Mean of the small block (always negative for r in (0,1)).
    pub mu_s: f64,
    /// Mean of the large block (always positive for r in (0,1)).
    pub mu_l: f64,
    pub var_s: f64,
    pub var_l: f64,
}

/// Dimensionless inputs to the first-layer deactivation estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerStatsInput {
    /// Input dimension of the layer.
    pub n: usize,
    /// a_i / (sigma_A * mu_x): relative importance of the bias.
    pub bias_ratio: f64,
    /// sigma_x^2 / mu_x^2: sharpness of the input distribution.
    pub sharpness: f64,
    /// Block-split ratio in (0, 1).
    pub r: f64,
}

impl LayerStatsInput {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParam("n must be >= 1".into()));
        }
        if !(self.sharpness >= 0.0) {
            return Err(Error::InvalidParam("sharpness must be >= 0".into()));
        }
        check_open_unit(self.r)?;
        Ok(())
    }
}

/// First-layer pre-activation moments and deactivation probabilities for the
/// small-block and large-block neurons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstLayerStats {
    pub mu_h_s: f64,
    pub mu_h_l: f64,
    pub sigma_h_s: f64,
    pub sigma_h_l: f64,
    /// P[h_i <= 0] for a small-block neuron.
    pub p_zero_s: f64,
    /// P[h_i <= 0] for a large-block neuron.
    pub p_zero_l: f64,
}

fn check_open_unit(r: f64) -> Result<()> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidParam(alloc::format!("r must be in (0,1), got {r}")));
    }
    Ok(())
}

/// erfinv(2r - 1), the standardized cut-off.
fn k_of_r(r: f64) -> f64 {
    erf_inv(2.0 * r - 1.0)
}

/// ln g(r); kept separate so products like r * g(r) can be formed in
/// log-space where exp(erfinv^2) would overflow.
fn ln_g(r: f64) -> f64 {
    let k = k_of_r(r);
    0.5 * log(core::f64::consts::PI) + k * k
}

/// g(r) = sqrt(pi) * exp(erfinv(2r-1)^2). Symmetric about r = 1/2.
pub fn g_of_r(r: f64) -> Result<f64> {
    check_open_unit(r)?;
    Ok(exp(ln_g(r)))
}

/// Cut-off c = sqrt(2) * sigma_a * erfinv(2r - 1): fraction r of the
/// N(0, sigma_a^2) mass lies below c.
pub fn cutoff(r: f64, sigma_a: f64) -> Result<f64> {
    check_open_unit(r)?;
    if sigma_a <= 0.0 {
        return Err(Error::InvalidParam("sigma_a must be positive".into()));
    }
    Ok(SQRT_2 * sigma_a * k_of_r(r))
}

/// Block means and variances of a split N(0, sigma_a^2) sample.
pub fn split_stats(r: f64, sigma_a: f64) -> Result<SplitStats> {
    check_open_unit(r)?;
    if sigma_a <= 0.0 {
        return Err(Error::InvalidParam("sigma_a must be positive".into()));
    }
    let k = k_of_r(r);
    let lg = ln_g(r);
    // r*g(r) and (1-r)*g(r) in log-space; both stay finite as r -> 0 or 1
    // even where g alone would overflow.
    let rg = exp(log(r) + lg);
    let qg = exp(log(1.0 - r) + lg);
    let mu_s = -sigma_a / (SQRT_2 * rg);
    let mu_l = sigma_a / (SQRT_2 * qg);
    let var_s = sigma_a * sigma_a + SQRT_2 * sigma_a * k * mu_s - mu_s * mu_s;
    let var_l = sigma_a * sigma_a + SQRT_2 * sigma_a * k * mu_l - mu_l * mu_l;
    Ok(SplitStats { r, sigma_a, c: SQRT_2 * sigma_a * k, g: exp(lg), mu_s, mu_l, var_s, var_l })
}

/// P[h <= 0] for h ~ N(mu, sigma^2): 1/2 - 1/2 erf(mu / (sigma sqrt(2))).
pub fn p_zero_from_ratio(ratio: f64) -> f64 {
    0.5 - 0.5 * erf(ratio)
}

/// First-layer moments and deactivation probabilities, keeping the bias term
/// in the mean estimate (the default used everywhere).
pub fn first_layer_stats(
    input: &LayerStatsInput,
    sigma_a: f64,
    mu_x: f64,
) -> Result<FirstLayerStats> {
    first_layer_stats_with(input, sigma_a, mu_x, true)
}

/// As [`first_layer_stats`], with `keep_bias = false` reproducing the
/// coarser estimate that drops a_i from the mean entirely.
pub fn first_layer_stats_with(
    input: &LayerStatsInput,
    sigma_a: f64,
    mu_x: f64,
    keep_bias: bool,
) -> Result<FirstLayerStats> {
    input.validate()?;
    if mu_x <= 0.0 {
        return Err(Error::InvalidParam("mu_x must be positive".into()));
    }
    let split = split_stats(input.r, sigma_a)?;
    let n = input.n as f64;
    let a = input.bias_ratio * sigma_a * mu_x;
    let var_x = input.sharpness * mu_x * mu_x;
    let bias = if keep_bias { a } else { 0.0 };

    let moments = |mu_a: f64, var_a: f64| -> (f64, f64) {
        let mu_h = n * mu_x * mu_a + bias;
        let var_h = n * (mu_a * mu_a * var_x + var_a * var_x + var_a * mu_x * mu_x);
        (mu_h, sqrt(var_h))
    };
    let (mu_h_s, sigma_h_s) = moments(split.mu_s, split.var_s);
    let (mu_h_l, sigma_h_l) = moments(split.mu_l, split.var_l);
    Ok(FirstLayerStats {
        mu_h_s,
        mu_h_l,
        sigma_h_s,
        sigma_h_l,
        p_zero_s: p_zero_from_ratio(mu_h_s / (sigma_h_s * SQRT_2)),
        p_zero_l: p_zero_from_ratio(mu_h_l / (sigma_h_l * SQRT_2)),
    })
}

/// Dimensionless closed form of mu_{h,S} / (sigma_{h,S} sqrt(2)).
///
/// The bias term carries the coefficient 1/sqrt(2n); this is what composing
/// the mean and variance estimates gives, and what Monte Carlo confirms.
pub fn ratio_small(input: &LayerStatsInput) -> Result<f64> {
    input.validate()?;
    let n = input.n as f64;
    let k = k_of_r(input.r);
    let rg = exp(log(input.r) + ln_g(input.r));
    let num = input.bias_ratio * rg / sqrt(2.0 * n) - sqrt(n / 4.0);
    let den = sqrt((rg * rg - k * rg) * (input.sharpness + 1.0) - 0.5);
    Ok(num / den)
}

/// Dimensionless closed form of mu_{h,L} / (sigma_{h,L} sqrt(2)).
pub fn ratio_large(input: &LayerStatsInput) -> Result<f64> {
    input.validate()?;
    let n = input.n as f64;
    let k = k_of_r(input.r);
    let qg = exp(log(1.0 - input.r) + ln_g(input.r));
    let num = input.bias_ratio * qg / sqrt(2.0 * n) + sqrt(n / 4.0);
    let den = sqrt((qg * qg + k * qg) * (input.sharpness + 1.0) - 0.5);
    Ok(num / den)
}

/// log10 of the probability of obtaining a block-split m x n matrix by
/// chance: (r mn)! ((1-r) mn)! / (mn)!, computed entirely in log-gamma so it
/// never overflows.
pub fn permutation_chance_log10(m: usize, n: usize, r: f64) -> Result<f64> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidParam("m and n must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidParam(alloc::format!("r must be in [0,1], got {r}")));
    }
    let mn = (m as f64) * (n as f64);
    let k = libm::round(r * mn);
    let ln10 = log(10.0);
    Ok((ln_gamma(k + 1.0) + ln_gamma(mn - k + 1.0) - ln_gamma(mn + 1.0)) / ln10)
}
