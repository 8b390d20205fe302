//! Distribution summaries for experiment results: Gaussian kernel density
//! estimation for best-accuracy samples and integer histograms for
//! best-epoch samples.

use crate::error::{Error, Result};
use alloc::vec::Vec;
use libm::{exp, pow, sqrt};

const KDE_GRID: usize = 512;
const SQRT_2PI: f64 = 2.5066282746310002;

/// A sampled density curve.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeCurve {
    pub xs: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

impl KdeCurve {
    /// Trapezoid integral over the sampled grid.
    pub fn integral(&self) -> f64 {
        let mut acc = 0.0;
        for w in self.xs.windows(2).zip(self.density.windows(2)) {
            let (x, d) = w;
            acc += 0.5 * (d[0] + d[1]) * (x[1] - x[0]);
        }
        acc
    }
}

fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    sqrt(var)
}

/// Silverman's rule of thumb: 0.9 * min(std, IQR/1.34) * n^(-1/5).
fn silverman_bandwidth(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let q = |p: f64| sorted[((p * (n - 1) as f64) as usize).min(n - 1)];
    let iqr = q(0.75) - q(0.25);
    let std = sample_std(values);
    let scale = if iqr > 0.0 { std.min(iqr / 1.34) } else { std };
    (0.9 * scale * pow(n as f64, -0.2)).max(1e-9)
}

/// Gaussian KDE sampled on a uniform grid spanning the data ± 4 bandwidths.
pub fn kde(values: &[f64], bandwidth: Option<f64>) -> Result<KdeCurve> {
    if values.len() < 2 {
        return Err(Error::InvalidParam("kde needs at least 2 values".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("kde input".into()));
    }
    let bw = match bandwidth {
        Some(b) if b > 0.0 => b,
        Some(b) => {
            return Err(Error::InvalidParam(alloc::format!("bandwidth must be positive, got {b}")))
        }
        None => silverman_bandwidth(values),
    };
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min) - 4.0 * bw;
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 4.0 * bw;
    let n = values.len() as f64;
    let step = (hi - lo) / (KDE_GRID - 1) as f64;
    let mut xs = Vec::with_capacity(KDE_GRID);
    let mut density = Vec::with_capacity(KDE_GRID);
    for i in 0..KDE_GRID {
        let x = lo + step * i as f64;
        let mut acc = 0.0;
        for v in values {
            let z = (x - v) / bw;
            acc += exp(-0.5 * z * z);
        }
        xs.push(x);
        density.push(acc / (n * bw * SQRT_2PI));
    }
    Ok(KdeCurve { xs, density, bandwidth: bw })
}

/// One histogram bin over `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Equal-width histogram of integer samples over [min, max + 1).
pub fn histogram(values: &[usize], bins: usize) -> Result<Vec<Bin>> {
    if bins == 0 {
        return Err(Error::InvalidParam("bins must be >= 1".into()));
    }
    if values.is_empty() {
        return Ok(Vec::new());
    }
    let lo = *values.iter().min().unwrap() as f64;
    let hi = *values.iter().max().unwrap() as f64 + 1.0;
    let width = (hi - lo) / bins as f64;
    let mut counts = alloc::vec![0usize; bins];
    for &v in values {
        let idx = (((v as f64 - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| Bin { lo: lo + width * i as f64, hi: lo + width * (i + 1) as f64, count })
        .collect())
}
