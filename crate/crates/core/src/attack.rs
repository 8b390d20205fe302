//! Adversarial initialization transforms.
//!
//! Every permutation attack works the same way: sort the tensor's entries,
//! split them into a "small" block S and a "large" block L, and place the
//! blocks back into zones of the tensor chosen so that consecutive layers
//! cancel through the ReLU. Odd layers stack S over L row-wise; even ("cross")
//! layers lay L before S column-wise so the large values multiply the
//! previous layer's dead neurons. The entry multiset is preserved exactly, so
//! mean, variance and shape are untouched.
//!
//! * Soft knockout: S = smallest `r * len` entries.
//! * Shift: S = negative entries; on cross layers the zone assignment of the
//!   first `s mod width` rows is rotated so their L zone sits over the
//!   previous layer's live inputs, leaving exactly `s` active neurons.
//! * Conv variants: S goes into the leading filters on odd layers; on even
//!   layers each filter's S cells cover the channels the previous layer left
//!   active. Attacked filters get a per-filter channel rotation (shift) or an
//!   independent re-split with ratio `r` (soft).
//! * Scale / variance swap: plain rescaling, the appendix's non-permutation
//!   baselines.
//!
//! Within a block, `Placement::Stable` fills values ascending in zone scan
//! order (ties broken by original flat index); `Placement::Shuffled(seed)`
//! permutes each block with a generator derived from the seed and the
//! position of the tensor in the stream.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::WeightTensor;
use alloc::vec;
use alloc::vec::Vec;
use libm::sqrt;

/// Which transform a stream applies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttackKind {
    SoftKnockout,
    Shift,
    ConvSoftKnockout,
    ConvShift,
    ScaleWeights,
    VarianceSwap,
}

/// How block entries are arranged inside their zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// Ascending fill; deterministic and easiest to inspect in tests.
    Stable,
    /// Seeded uniform shuffle per block, reproducing the randomized look.
    Shuffled(u64),
}

/// Attack kind plus all its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackConfig {
    pub kind: AttackKind,
    /// Block-split ratio in [0, 1] (soft knockout variants).
    pub r: f64,
    /// Shift in zone positions (shift variants).
    pub s: usize,
    /// Number of filters on even conv layers receiving the per-filter change.
    pub attacked_filters: usize,
    /// Multiplier for `ScaleWeights`.
    pub scale_factor: f64,
    pub placement: Placement,
    /// Initial value of the cross flag (false = first layer is row-split).
    pub start_parity: bool,
}

impl AttackConfig {
    fn base(kind: AttackKind) -> Self {
        AttackConfig {
            kind,
            r: 0.5,
            s: 0,
            attacked_filters: 0,
            scale_factor: 1.0,
            placement: Placement::Stable,
            start_parity: false,
        }
    }

    pub fn soft_knockout(r: f64) -> Self {
        AttackConfig { r, ..Self::base(AttackKind::SoftKnockout) }
    }

    pub fn shift(s: usize) -> Self {
        AttackConfig { s, ..Self::base(AttackKind::Shift) }
    }

    pub fn conv_soft_knockout(r: f64, attacked_filters: usize) -> Self {
        AttackConfig { r, attacked_filters, ..Self::base(AttackKind::ConvSoftKnockout) }
    }

    pub fn conv_shift(s: usize, attacked_filters: usize) -> Self {
        AttackConfig { s, attacked_filters, ..Self::base(AttackKind::ConvShift) }
    }

    pub fn scale(factor: f64) -> Self {
        AttackConfig { scale_factor: factor, ..Self::base(AttackKind::ScaleWeights) }
    }

    pub fn variance_swap() -> Self {
        Self::base(AttackKind::VarianceSwap)
    }

    pub fn with_placement(mut self, placement: Placement) -> Self {
        self.placement = placement;
        self
    }

    pub fn with_start_parity(mut self, start_parity: bool) -> Self {
        self.start_parity = start_parity;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.r) {
            return Err(Error::InvalidParam(alloc::format!("r must be in [0,1], got {}", self.r)));
        }
        if self.scale_factor <= 0.0 || !self.scale_factor.is_finite() {
            return Err(Error::InvalidParam(alloc::format!(
                "scale factor must be positive, got {}",
                self.scale_factor
            )));
        }
        Ok(())
    }
}

/// Per-network attack state: the cross flag alternates once per processed
/// tensor, and even conv layers need to know which channels the previous
/// layer deactivated.
#[derive(Debug, Clone)]
pub struct AttackStream {
    config: AttackConfig,
    cross: bool,
    counter: usize,
    prev_dead_channels: Option<usize>,
}

impl AttackStream {
    pub fn new(config: AttackConfig) -> Result<Self> {
        config.validate()?;
        Ok(AttackStream {
            cross: config.start_parity,
            config,
            counter: 0,
            prev_dead_channels: None,
        })
    }

    pub fn config(&self) -> &AttackConfig {
        &self.config
    }

    pub fn cross(&self) -> bool {
        self.cross
    }

    fn advance(&mut self) {
        self.cross = !self.cross;
        self.counter += 1;
    }

    /// Apply the stream's transform to the next tensor in initialization order.
    pub fn apply(&mut self, w: &WeightTensor) -> Result<WeightTensor> {
        match self.config.kind {
            AttackKind::SoftKnockout => soft_knockout_fc(self, w),
            AttackKind::Shift => shift_fc(self, w),
            AttackKind::ConvSoftKnockout | AttackKind::ConvShift => match w.rank() {
                4 => conv_attack(self, w),
                // Conv networks commonly end in dense layers; keep one parity
                // stream across the whole net.
                2 => {
                    if self.config.kind == AttackKind::ConvShift {
                        shift_fc(self, w)
                    } else {
                        soft_knockout_fc(self, w)
                    }
                }
                r => Err(Error::InvalidShape(alloc::format!(
                    "conv attack expects rank 2 or 4 tensors, got rank {r}"
                ))),
            },
            AttackKind::ScaleWeights => {
                let out = scale_weights(w, self.config.scale_factor)?;
                self.advance();
                Ok(out)
            }
            AttackKind::VarianceSwap => {
                let out = variance_swap_scale(w)?;
                self.advance();
                Ok(out)
            }
        }
    }
}

/// Entries sorted ascending; ties keep original flat-index order.
fn sorted_values(w: &WeightTensor) -> Vec<f64> {
    let mut vals = w.data().to_vec();
    // Vec::sort_by is stable, which implements the documented tie-break.
    vals.sort_by(f64::total_cmp);
    vals
}

/// Write the small/large blocks into their zone cells. `cells_*` hold flat
/// indices in fill order; `sorted` is the ascending entry multiset split at
/// `k_small`.
fn place(
    w: &WeightTensor,
    sorted: Vec<f64>,
    k_small: usize,
    small_cells: &[usize],
    large_cells: &[usize],
    placement: Placement,
    stream_pos: usize,
) -> Result<WeightTensor> {
    debug_assert_eq!(small_cells.len(), k_small);
    debug_assert_eq!(large_cells.len(), sorted.len() - k_small);
    let mut small_vals = sorted[..k_small].to_vec();
    let mut large_vals = sorted[k_small..].to_vec();
    if let Placement::Shuffled(seed) = placement {
        let root = Rng::new(seed);
        root.child(2 * stream_pos as u64).shuffle(&mut small_vals);
        root.child(2 * stream_pos as u64 + 1).shuffle(&mut large_vals);
    }
    let mut data = vec![0.0; w.len()];
    for (&cell, v) in small_cells.iter().zip(small_vals) {
        data[cell] = v;
    }
    for (&cell, v) in large_cells.iter().zip(large_vals) {
        data[cell] = v;
    }
    w.with_data(data)
}

/// Row-split layout: the k smallest entries occupy the leading cells in
/// row-major order ("S over L").
fn fc_rows_small_first(
    stream: &AttackStream,
    w: &WeightTensor,
    k_small: usize,
) -> Result<WeightTensor> {
    let sorted = sorted_values(w);
    let small_cells: Vec<usize> = (0..k_small).collect();
    let large_cells: Vec<usize> = (k_small..w.len()).collect();
    place(w, sorted, k_small, &small_cells, &large_cells, stream.config.placement, stream.counter)
}

/// Column-split layout "(L S)": large entries fill leading cells in
/// column-major order. `flip_rows` rows (from the top) get their zone
/// assignment rotated so their L zone ends at the last column instead.
fn fc_cols_large_first(
    stream: &AttackStream,
    w: &WeightTensor,
    k_small: usize,
    flip_rows: usize,
) -> Result<WeightTensor> {
    let (rows, cols) = (w.rows(), w.cols());
    let n_large = w.len() - k_small;
    // Column-major position of cell (i, j) is j*rows + i; the base zone marks
    // the first n_large positions as large.
    let full_cols = n_large / rows;
    let rem = n_large % rows;
    let large_cols_in_row = |i: usize| full_cols + usize::from(i < rem);

    let mut small_cells = Vec::with_capacity(k_small);
    let mut large_cells = Vec::with_capacity(n_large);
    for j in 0..cols {
        for i in 0..rows {
            let c_i = large_cols_in_row(i);
            let large = if i < flip_rows {
                // L zone rotated to the trailing columns [cols - c_i, cols).
                j >= cols - c_i
            } else {
                j < c_i
            };
            let flat = i * cols + j;
            if large {
                large_cells.push(flat);
            } else {
                small_cells.push(flat);
            }
        }
    }
    let sorted = sorted_values(w);
    place(w, sorted, k_small, &small_cells, &large_cells, stream.config.placement, stream.counter)
}

fn require_rank2(w: &WeightTensor) -> Result<()> {
    if w.rank() != 2 {
        return Err(Error::InvalidShape(alloc::format!(
            "fully connected attack expects a rank-2 tensor, got rank {}",
            w.rank()
        )));
    }
    Ok(())
}

/// Soft knockout on a fully connected tensor: split at ratio `r`, stack
/// S over L on odd layers, cross (L S) column-wise on even layers.
pub fn soft_knockout_fc(stream: &mut AttackStream, w: &WeightTensor) -> Result<WeightTensor> {
    require_rank2(w)?;
    let k_small = libm::round(stream.config.r * w.len() as f64) as usize;
    let out = if stream.cross {
        fc_cols_large_first(stream, w, k_small, 0)
    } else {
        fc_rows_small_first(stream, w, k_small)
    }?;
    stream.advance();
    Ok(out)
}

/// Shift attack on a fully connected tensor: split at the sign boundary; on
/// cross layers the first `s mod cols` rows have their L zone moved over the
/// previous layer's live inputs, which is what leaves `s` neurons active.
pub fn shift_fc(stream: &mut AttackStream, w: &WeightTensor) -> Result<WeightTensor> {
    require_rank2(w)?;
    let k_small = w.data().iter().filter(|v| **v < 0.0).count();
    let out = if stream.cross {
        let s_eff = stream.config.s % w.cols();
        fc_cols_large_first(stream, w, k_small, s_eff.min(w.rows()))
    } else {
        fc_rows_small_first(stream, w, k_small)
    }?;
    stream.advance();
    Ok(out)
}

/// Convolutional attack. Odd layers place the smallest entries into the
/// leading filters; even layers align each filter's small entries with the
/// channels the previous layer left active, with `attacked_filters` leading
/// filters modified per the stream's kind (channel rotation by `s`, or an
/// independent re-split with ratio `r`).
pub fn conv_attack(stream: &mut AttackStream, w: &WeightTensor) -> Result<WeightTensor> {
    if w.rank() != 4 {
        return Err(Error::InvalidShape(alloc::format!(
            "conv attack expects a rank-4 tensor, got rank {}",
            w.rank()
        )));
    }
    let (fh, fw, channels, filters) = w.conv_dims();
    let cfg = stream.config;
    if cfg.attacked_filters > filters {
        return Err(Error::InvalidParam(alloc::format!(
            "attacked_filters {} exceeds filter count {filters}",
            cfg.attacked_filters
        )));
    }
    let len = w.len();
    let out = if !stream.cross {
        // Filter split: small entries fill the leading filters contiguously
        // in filter-major order.
        let r_eff = if cfg.kind == AttackKind::ConvSoftKnockout { cfg.r } else { 0.5 };
        let k_small = libm::round(r_eff * len as f64) as usize;
        let mut small_cells = Vec::with_capacity(k_small);
        let mut large_cells = Vec::with_capacity(len - k_small);
        let mut pos = 0usize;
        for f in 0..filters {
            for h in 0..fh {
                for x in 0..fw {
                    for c in 0..channels {
                        let idx = w.conv_index(h, x, c, f);
                        if pos < k_small {
                            small_cells.push(idx);
                        } else {
                            large_cells.push(idx);
                        }
                        pos += 1;
                    }
                }
            }
        }
        let filter_size = fh * fw * channels;
        stream.prev_dead_channels = Some(k_small.div_ceil(filter_size).min(filters));
        let sorted = sorted_values(w);
        place(w, sorted, k_small, &small_cells, &large_cells, cfg.placement, stream.counter)
    } else {
        // Channel alignment: per filter, channels the previous layer killed
        // get the large entries, live channels get the small ones.
        let dead = stream
            .prev_dead_channels
            .unwrap_or(channels.div_ceil(2))
            .min(channels);
        let mut large_ch = vec![vec![false; channels]; filters];
        for (f, row) in large_ch.iter_mut().enumerate() {
            if f < cfg.attacked_filters {
                match cfg.kind {
                    AttackKind::ConvShift => {
                        // Rotate the base zone right by s channels.
                        let s_eff = cfg.s % channels.max(1);
                        for c in 0..channels {
                            row[(c + s_eff) % channels] = c < dead;
                        }
                    }
                    AttackKind::ConvSoftKnockout => {
                        // Independent re-split: smallest r-fraction of
                        // channels first, large on the rest.
                        let small_ch = (libm::ceil(cfg.r * channels as f64) as usize).min(channels);
                        for (c, cell) in row.iter_mut().enumerate() {
                            *cell = c >= small_ch;
                        }
                    }
                    _ => unreachable!("conv_attack only runs for conv kinds"),
                }
            } else {
                for (c, cell) in row.iter_mut().enumerate() {
                    *cell = c < dead;
                }
            }
        }
        let mut small_cells = Vec::new();
        let mut large_cells = Vec::new();
        for f in 0..filters {
            for h in 0..fh {
                for x in 0..fw {
                    for c in 0..channels {
                        let idx = w.conv_index(h, x, c, f);
                        if large_ch[f][c] {
                            large_cells.push(idx);
                        } else {
                            small_cells.push(idx);
                        }
                    }
                }
            }
        }
        stream.prev_dead_channels = None;
        let k_small = small_cells.len();
        let sorted = sorted_values(w);
        place(w, sorted, k_small, &small_cells, &large_cells, cfg.placement, stream.counter)
    }?;
    stream.advance();
    Ok(out)
}

/// Multiply every entry by `factor` (> 0).
pub fn scale_weights(w: &WeightTensor, factor: f64) -> Result<WeightTensor> {
    if factor <= 0.0 || !factor.is_finite() {
        return Err(Error::InvalidParam(alloc::format!(
            "scale factor must be positive and finite, got {factor}"
        )));
    }
    w.with_data(w.data().iter().map(|v| v * factor).collect())
}

/// Rescale an initialized tensor from the He variance 2/fan_in to the
/// swapped 2/fan_out, i.e. multiply by sqrt(fan_in / fan_out).
pub fn variance_swap_scale(w: &WeightTensor) -> Result<WeightTensor> {
    let (fan_in, fan_out) = match w.shape() {
        [rows, cols] => (*cols, *rows),
        [fh, fw, c, f] => (fh * fw * c, fh * fw * f),
        other => {
            return Err(Error::InvalidShape(alloc::format!(
                "variance swap expects rank 2 or 4, got {other:?}"
            )))
        }
    };
    scale_weights(w, sqrt(fan_in as f64 / fan_out as f64))
}

/// Apply the configured attack to a whole network's weight tensors, in order
/// of initialization, through a single parity stream. Biases are never
/// touched by any attack; callers simply don't pass them here.
pub fn attack_network(weights: &[WeightTensor], cfg: &AttackConfig) -> Result<Vec<WeightTensor>> {
    if weights.is_empty() {
        return Err(Error::InvalidParam("attack_network needs at least one tensor".into()));
    }
    let mut stream = AttackStream::new(*cfg)?;
    weights.iter().map(|w| stream.apply(w)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fc(rows: usize, cols: usize, data: &[f64]) -> WeightTensor {
        WeightTensor::fc(rows, cols, data.to_vec(), 0).unwrap()
    }

    fn sorted(w: &WeightTensor) -> Vec<f64> {
        sorted_values(w)
    }

    #[test]
    fn soft_knockout_non_cross_layout() {
        let w = fc(2, 2, &[0.3, -0.1, -0.2, 0.4]);
        let mut stream = AttackStream::new(AttackConfig::soft_knockout(0.5)).unwrap();
        let out = stream.apply(&w).unwrap();
        assert_eq!(out.data(), &[-0.2, -0.1, 0.3, 0.4]);
        assert!(stream.cross());
    }

    #[test]
    fn soft_knockout_cross_layout() {
        let w = fc(2, 2, &[0.3, -0.1, -0.2, 0.4]);
        let cfg = AttackConfig::soft_knockout(0.5).with_start_parity(true);
        let mut stream = AttackStream::new(cfg).unwrap();
        let out = stream.apply(&w).unwrap();
        assert_eq!(out.data(), &[0.3, -0.2, 0.4, -0.1]);
        assert!(!stream.cross());
    }

    #[test]
    fn soft_knockout_r_zero_is_full_sort() {
        let w = fc(2, 3, &[5.0, -1.0, 3.0, 0.5, -2.0, 4.0]);
        let mut stream = AttackStream::new(AttackConfig::soft_knockout(0.0)).unwrap();
        let out = stream.apply(&w).unwrap();
        assert_eq!(out.data(), &[-2.0, -1.0, 0.5, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn shift_full_width_rotation_is_identity() {
        let mut rng = Rng::new(21);
        let data = crate::rng::normal_sample(&mut rng, 0.0, 1.0, 48).unwrap();
        let w = fc(6, 8, &data);
        let unshifted = {
            let cfg = AttackConfig::shift(0).with_start_parity(true);
            AttackStream::new(cfg).unwrap().apply(&w).unwrap()
        };
        let full = {
            let cfg = AttackConfig::shift(8).with_start_parity(true);
            AttackStream::new(cfg).unwrap().apply(&w).unwrap()
        };
        assert_eq!(unshifted.data(), full.data());
    }

    #[test]
    fn shift_all_negative_is_ascending_sort() {
        let vals = [-5.0, -0.1, -3.0, -2.0, -4.0, -1.0];
        // Non-cross: ascending in row-major order.
        let w = fc(2, 3, &vals);
        let mut stream = AttackStream::new(AttackConfig::shift(2)).unwrap();
        let out = stream.apply(&w).unwrap();
        assert_eq!(out.data(), &[-5.0, -4.0, -3.0, -2.0, -1.0, -0.1]);
        // Cross: ascending in column-major order, any s.
        for s in [0, 1, 2, 5] {
            let cfg = AttackConfig::shift(s).with_start_parity(true);
            let out = AttackStream::new(cfg).unwrap().apply(&w).unwrap();
            assert_eq!(out.data(), &[-5.0, -3.0, -1.0, -4.0, -2.0, -0.1]);
        }
    }

    #[test]
    fn shift_cross_flips_leading_rows() {
        // 4x4 with 8 negatives: base cross layout has L in columns 0-1.
        // With s = 1 the first row's L zone moves to columns 2-3.
        let vals = [
            -1.0, -2.0, -3.0, -4.0, -5.0, -6.0, -7.0, -8.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0,
        ];
        let cfg = AttackConfig::shift(1).with_start_parity(true);
        let out = AttackStream::new(cfg).unwrap().apply(&fc(4, 4, &vals)).unwrap();
        // Row 0 flipped: small, small, large, large. Rows 1-3 base: L L S S.
        for j in 0..2 {
            assert!(out.at(0, j) < 0.0, "row 0 col {j} should be small");
            assert!(out.at(0, j + 2) >= 0.0, "row 0 col {} should be large", j + 2);
        }
        for i in 1..4 {
            for j in 0..2 {
                assert!(out.at(i, j) >= 0.0);
                assert!(out.at(i, j + 2) < 0.0);
            }
        }
    }

    #[test]
    fn conv_non_cross_splits_filters() {
        let mut rng = Rng::new(22);
        let data = crate::rng::normal_sample(&mut rng, 0.0, 1.0, 36).unwrap();
        let w = WeightTensor::conv(3, 3, 1, 4, data, 0).unwrap();
        let mut stream = AttackStream::new(AttackConfig::conv_soft_knockout(0.5, 1)).unwrap();
        let out = stream.apply(&w).unwrap();
        let all = sorted(&w);
        let (small, large) = all.split_at(18);
        for f in 0..4usize {
            for h in 0..3 {
                for x in 0..3 {
                    let v = out.data()[out.conv_index(h, x, 0, f)];
                    if f < 2 {
                        assert!(small.contains(&v), "filter {f} entry {v} not small");
                    } else {
                        assert!(large.contains(&v), "filter {f} entry {v} not large");
                    }
                }
            }
        }
    }

    #[test]
    fn conv_cross_full_period_rotation_identity() {
        let mut rng = Rng::new(23);
        let data = crate::rng::normal_sample(&mut rng, 0.0, 1.0, 3 * 3 * 8 * 4).unwrap();
        let w = WeightTensor::conv(3, 3, 8, 4, data, 0).unwrap();
        let out_s0 = {
            let cfg = AttackConfig::conv_shift(0, 4).with_start_parity(true);
            AttackStream::new(cfg).unwrap().apply(&w).unwrap()
        };
        let out_full = {
            let cfg = AttackConfig::conv_shift(8, 4).with_start_parity(true);
            AttackStream::new(cfg).unwrap().apply(&w).unwrap()
        };
        assert_eq!(out_s0.data(), out_full.data());
    }

    #[test]
    fn conv_rejects_too_many_filters() {
        let w = WeightTensor::conv(3, 3, 1, 4, vec![0.5; 36], 0).unwrap();
        let mut stream = AttackStream::new(AttackConfig::conv_shift(1, 5)).unwrap();
        assert!(stream.apply(&w).is_err());
    }

    #[test]
    fn scale_weights_examples() {
        let w = fc(2, 2, &[1.0, -2.0, 3.0, -4.0]);
        assert_eq!(scale_weights(&w, 1.0).unwrap().data(), w.data());
        let doubled = scale_weights(&w, 2.0).unwrap();
        assert!((doubled.variance() - 4.0 * w.variance()).abs() < 1e-12);
        assert!(scale_weights(&w, 0.0).is_err());
        assert!(scale_weights(&w, -1.0).is_err());
    }

    #[test]
    fn scale_halves_he_std() {
        let spec = crate::init::InitializerSpec::he(crate::init::BiasPolicy::Zero);
        let (w, _) = crate::init::init_layer(&spec, &[100, 200], &mut Rng::new(24)).unwrap();
        let half = scale_weights(&w, 0.5).unwrap();
        let ratio = sqrt(half.variance()) / sqrt(w.variance());
        assert!((ratio - 0.5).abs() < 1e-12);
    }

    #[test]
    fn multiset_preserved_by_all_permutation_attacks() {
        let mut rng = Rng::new(25);
        let fc_data = crate::rng::normal_sample(&mut rng, 0.0, 1.0, 7 * 9).unwrap();
        let conv_data = crate::rng::normal_sample(&mut rng, 0.0, 1.0, 3 * 3 * 4 * 6).unwrap();
        let wf = fc(7, 9, &fc_data);
        let wc = WeightTensor::conv(3, 3, 4, 6, conv_data, 0).unwrap();
        let configs = [
            AttackConfig::soft_knockout(0.3),
            AttackConfig::soft_knockout(0.5).with_placement(Placement::Shuffled(9)),
            AttackConfig::shift(3),
            AttackConfig::shift(2).with_start_parity(true),
        ];
        for cfg in configs {
            let out = AttackStream::new(cfg).unwrap().apply(&wf).unwrap();
            assert_eq!(sorted(&out), sorted(&wf), "{cfg:?}");
        }
        for cfg in [
            AttackConfig::conv_soft_knockout(0.4, 2),
            AttackConfig::conv_shift(2, 3).with_start_parity(true),
            AttackConfig::conv_shift(1, 1).with_placement(Placement::Shuffled(4)),
        ] {
            let out = AttackStream::new(cfg).unwrap().apply(&wc).unwrap();
            assert_eq!(sorted(&out), sorted(&wc), "{cfg:?}");
        }
    }

    #[test]
    fn attack_network_two_layer_cross_pattern() {
        let mut rng = Rng::new(26);
        let a = fc(4, 6, &crate::rng::normal_sample(&mut rng, 0.0, 1.0, 24).unwrap());
        let b = fc(5, 4, &crate::rng::normal_sample(&mut rng, 0.0, 1.0, 20).unwrap());
        let out = attack_network(&[a.clone(), b.clone()], &AttackConfig::soft_knockout(0.5)).unwrap();
        // Layer 0 row-split: sorted ascending row-major.
        assert_eq!(out[0].data(), sorted(&a).as_slice());
        // Layer 1 column-split: leading columns hold the large half.
        let all = sorted(&b);
        let median = all[10];
        for i in 0..5 {
            assert!(out[1].at(i, 0) >= median);
            assert!(out[1].at(i, 3) < median || out[1].at(i, 3) <= all[9]);
        }
    }

    #[test]
    fn attack_network_identity_scale() {
        let w = fc(3, 3, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]);
        let out = attack_network(&[w.clone()], &AttackConfig::scale(1.0)).unwrap();
        assert_eq!(out[0].data(), w.data());
    }

    #[test]
    fn parity_alternates_once_per_tensor() {
        let w = fc(3, 3, &[0.1; 9]);
        for start in [false, true] {
            let cfg = AttackConfig::soft_knockout(0.5).with_start_parity(start);
            let mut stream = AttackStream::new(cfg).unwrap();
            for k in 1..=5 {
                stream.apply(&w).unwrap();
                assert_eq!(stream.cross(), start ^ (k % 2 == 1));
            }
        }
    }

    #[test]
    fn fc_kinds_reject_conv_tensors() {
        let w = WeightTensor::conv(3, 3, 1, 2, vec![0.1; 18], 0).unwrap();
        let mut stream = AttackStream::new(AttackConfig::shift(1)).unwrap();
        assert!(stream.apply(&w).is_err());
        let mut stream = AttackStream::new(AttackConfig::soft_knockout(0.5)).unwrap();
        assert!(stream.apply(&w).is_err());
    }

    #[test]
    fn variance_swap_scales_by_fan_ratio() {
        let w = fc(10, 1000, &vec![0.01; 10_000]);
        let out = variance_swap_scale(&w).unwrap();
        assert!((out.data()[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid_r() {
        assert!(AttackStream::new(AttackConfig::soft_knockout(1.5)).is_err());
        assert!(AttackStream::new(AttackConfig::soft_knockout(-0.1)).is_err());
    }
}
