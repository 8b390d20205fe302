//! Dense weight tensor storage and shape algebra.
//!
//! A [`WeightTensor`] is an immutable-by-convention value: every transform in
//! this crate returns a new tensor. Layouts are row-major throughout; conv
//! tensors use axis order (filter height, filter width, in-channels, filters).

use crate::error::{Error, Result};
use alloc::format;
use alloc::vec::Vec;

/// A shaped dense array of real weights plus its position in the network.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    layer_index: usize,
}

impl WeightTensor {
    /// Build a tensor, validating shape/data consistency and finiteness.
    pub fn new(shape: Vec<usize>, data: Vec<f64>, layer_index: usize) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&d| d == 0) {
            return Err(Error::InvalidShape(format!("shape {shape:?} has zero or no dims")));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::InvalidShape(format!(
                "shape {shape:?} wants {len} entries, data has {}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("entry {pos} is {}", data[pos])));
        }
        Ok(WeightTensor { shape, data, layer_index })
    }

    /// A rank-2 (fully connected) tensor with `rows` output neurons.
    pub fn fc(rows: usize, cols: usize, data: Vec<f64>, layer_index: usize) -> Result<Self> {
        Self::new(alloc::vec![rows, cols], data, layer_index)
    }

    /// A rank-4 convolution tensor (filter_h, filter_w, in_channels, filters).
    pub fn conv(
        fh: usize,
        fw: usize,
        channels: usize,
        filters: usize,
        data: Vec<f64>,
        layer_index: usize,
    ) -> Result<Self> {
        Self::new(alloc::vec![fh, fw, channels, filters], data, layer_index)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn layer_index(&self) -> usize {
        self.layer_index
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Rows of a rank-2 tensor (output neurons).
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Columns of a rank-2 tensor (inputs).
    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    /// Entry of a rank-2 tensor.
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.shape[1] + col]
    }

    /// (filter_h, filter_w, in_channels, filters) of a rank-4 tensor.
    pub fn conv_dims(&self) -> (usize, usize, usize, usize) {
        (self.shape[0], self.shape[1], self.shape[2], self.shape[3])
    }

    /// Flat row-major index of a conv entry.
    pub fn conv_index(&self, h: usize, w: usize, c: usize, f: usize) -> usize {
        ((h * self.shape[1] + w) * self.shape[2] + c) * self.shape[3] + f
    }

    /// Replace the data, keeping shape and layer index. The new data must be
    /// a rearrangement-compatible buffer of the same length.
    pub(crate) fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::new(self.shape.clone(), data, self.layer_index)
    }

    pub(crate) fn with_layer_index(mut self, layer_index: usize) -> Self {
        self.layer_index = layer_index;
        self
    }

    /// Replace the data without the finiteness check; used by optimizer steps
    /// which validate afterwards so divergence reports the epoch.
    pub(crate) fn with_data_unchecked(&self, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        WeightTensor { shape: self.shape.clone(), data, layer_index: self.layer_index }
    }

    /// Mean of all entries.
    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.len() as f64
    }

    /// Population variance of all entries.
    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / self.len() as f64
    }

    /// Frobenius norm.
    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|v| v * v).sum::<f64>())
    }
}

/// Rearrange a tensor's entries: output position `i` receives the entry at
/// input position `permutation[i]`. The permutation must be a bijection on
/// `[0, len)`; shape and entry multiset are preserved by construction.
pub fn permute_components(w: &WeightTensor, permutation: &[usize]) -> Result<WeightTensor> {
    if permutation.len() != w.len() {
        return Err(Error::InvalidPermutation(format!(
            "permutation length {} != tensor length {}",
            permutation.len(),
            w.len()
        )));
    }
    let mut seen = alloc::vec![false; w.len()];
    for &p in permutation {
        if p >= w.len() || seen[p] {
            return Err(Error::InvalidPermutation(format!(
                "index {p} out of range or repeated"
            )));
        }
        seen[p] = true;
    }
    let data: Vec<f64> = permutation.iter().map(|&p| w.data[p]).collect();
    w.with_data(data)
}
