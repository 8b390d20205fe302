//! Dataset container, synthetic task generation, and normalization.
//!
//! File-based loaders (CSV, IDX) live in the std companion crate; everything
//! here is pure computation so cached datasets, synthetic tasks and tests can
//! run without IO.

use crate::error::{Error, Result};
use crate::rng::Rng;
use alloc::string::String;
use alloc::vec::Vec;

/// An in-memory supervised dataset with all features normalized to [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    /// Row-major samples x dim.
    pub features: Vec<f64>,
    pub dim: usize,
    /// Shape each sample should be presented as: `[dim]` for tabular data,
    /// `[h, w, c]` for images.
    pub input_shape: Vec<usize>,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

impl Dataset {
    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// Majority-class fraction: the accuracy of always guessing the most
    /// common label.
    pub fn random_guess_accuracy(&self) -> f64 {
        let mut counts = alloc::vec![0usize; self.classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts.into_iter().max().unwrap_or(0) as f64 / self.n_samples().max(1) as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.labels.is_empty() {
            return Err(Error::InvalidData("empty dataset".into()));
        }
        if self.features.len() != self.dim * self.labels.len() {
            return Err(Error::InvalidData("feature buffer does not match samples x dim".into()));
        }
        if self.input_shape.iter().product::<usize>() != self.dim {
            return Err(Error::InvalidData("input_shape does not multiply to dim".into()));
        }
        if self.labels.iter().any(|&l| l >= self.classes) {
            return Err(Error::InvalidData("label out of range".into()));
        }
        if self.features.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidData("feature outside [0,1] after normalization".into()));
        }
        if self.train_idx.is_empty() || self.test_idx.is_empty() {
            return Err(Error::InvalidData("split leaves an empty train or test set".into()));
        }
        Ok(())
    }
}

/// Min-max normalize each column of a row-major samples x dim buffer to [0, 1].
/// Constant columns map to 0. Normalizing twice equals normalizing once.
pub fn normalize_min_max(features: &mut [f64], dim: usize) {
    if dim == 0 || features.is_empty() {
        return;
    }
    let n = features.len() / dim;
    for col in 0..dim {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for row in 0..n {
            let v = features[row * dim + col];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let span = hi - lo;
        for row in 0..n {
            let v = &mut features[row * dim + col];
            *v = if span == 0.0 { 0.0 } else { (*v - lo) / span };
        }
    }
}

/// Deterministic shuffled train/test split. `train_fraction` in (0, 1); both
/// sides must end up non-empty.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&train_fraction) || train_fraction == 0.0 {
        return Err(Error::InvalidParam(alloc::format!(
            "train fraction must be in (0,1), got {train_fraction}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    Rng::new(seed).shuffle(&mut perm);
    let n_train = libm::round(train_fraction * n as f64) as usize;
    let n_train = n_train.clamp(1, n.saturating_sub(1).max(1));
    if n < 2 || n_train >= n {
        return Err(Error::InvalidData(alloc::format!(
            "cannot split {n} samples into non-empty train and test sets"
        )));
    }
    let test = perm.split_off(n_train);
    Ok((perm, test))
}

/// Synthetic Gaussian-blob classification task: class k is centered at
/// `separation` times the k-th coordinate axis (a scaled simplex corner) with
/// unit isotropic noise, then min-max normalized to [0, 1].
pub fn gaussian_blobs(
    classes: usize,
    dim: usize,
    per_class: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if classes < 2 || dim < 2 || per_class == 0 || classes > dim {
        return Err(Error::InvalidParam(alloc::format!(
            "degenerate blob task: classes={classes} dim={dim} per_class={per_class}"
        )));
    }
    if !(separation >= 0.0) {
        return Err(Error::InvalidParam("separation must be >= 0".into()));
    }
    let n = classes * per_class;
    let root = Rng::new(seed);
    let mut noise = root.child(0);
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for class in 0..classes {
        for _ in 0..per_class {
            for d in 0..dim {
                let mean = if d == class { separation } else { 0.0 };
                features.push(mean + noise.normal());
            }
            labels.push(class);
        }
    }
    normalize_min_max(&mut features, dim);
    let (train_idx, test_idx) = split_indices(n, 0.8, root.child(1).seed())?;
    let ds = Dataset {
        name: alloc::format!("blobs{classes}x{dim}"),
        features,
        dim,
        input_shape: alloc::vec![dim],
        labels,
        classes,
        train_idx,
        test_idx,
    };
    ds.validate()?;
    Ok(ds)
}
