//! Defenses: a statistical detector for block-structured weight matrices,
//! grayscale weight rendering, per-channel activation reporting, and shuffle
//! remediation.
//!
//! The detector does not need to know the attack's split ratio: it splits at
//! the sample median and asks, per row, whether below-median entries
//! concentrate abnormally. Under exchangeable placement each row's count is
//! hypergeometric; the reported p-value is the Bonferroni-corrected minimum
//! two-sided row tail. Attacked matrices have entire rows on one side of the
//! median and get astronomically small p-values; the column-wise variant
//! catches cross layers.

use crate::error::{Error, Result};
use crate::math::ln_gamma;
use crate::nn::Network;
use crate::rng::Rng;
use crate::tensor::{permute_components, WeightTensor};
use alloc::vec::Vec;
use libm::{exp, round};

fn ln_choose(n: f64, k: f64) -> f64 {
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
}

/// P[X = x] for X ~ Hypergeometric(total N, successes K, draws n).
fn hypergeom_ln_pmf(nn: f64, kk: f64, n: f64, x: f64) -> f64 {
    ln_choose(kk, x) + ln_choose(nn - kk, n - x) - ln_choose(nn, n)
}

/// Two-sided tail probability of X ~ Hypergeometric(N, K, n) at x:
/// 2 * min(P[X <= x], P[X >= x]), clamped to 1.
fn hypergeom_two_sided(nn: usize, kk: usize, n: usize, x: usize) -> f64 {
    let lo_support = kk.saturating_sub(nn - n);
    let hi_support = n.min(kk);
    let (nn, kk, n, x_f) = (nn as f64, kk as f64, n as f64, x as f64);
    let mut lower = 0.0;
    let mut upper = 0.0;
    for v in lo_support..=hi_support {
        let p = exp(hypergeom_ln_pmf(nn, kk, n, v as f64));
        if (v as f64) <= x_f {
            lower += p;
        }
        if (v as f64) >= x_f {
            upper += p;
        }
    }
    (2.0 * lower.min(upper)).min(1.0)
}

/// Row-concentration test. Returns the Bonferroni-corrected p-value of the
/// most extreme row's below-median count. Requires at least a 4x4 matrix.
pub fn block_structure_test(w: &WeightTensor) -> Result<f64> {
    if w.rank() != 2 {
        return Err(Error::InvalidShape("block structure test expects a rank-2 tensor".into()));
    }
    let (rows, cols) = (w.rows(), w.cols());
    if rows < 4 || cols < 4 {
        return Err(Error::InvalidShape(alloc::format!(
            "block structure test needs at least 4x4, got {rows}x{cols}"
        )));
    }
    let mut sorted = w.data().to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    // K = entries strictly below the median. With heavy ties (e.g. an
    // all-equal matrix) K collapses toward 0 and the test carries no signal,
    // which correctly yields p = 1.
    let below = |v: f64| v < median;
    let total_below = w.data().iter().filter(|v| below(**v)).count();
    let mut min_tail = 1.0f64;
    for i in 0..rows {
        let count = (0..cols).filter(|&j| below(w.at(i, j))).count();
        let tail = hypergeom_two_sided(rows * cols, total_below, cols, count);
        min_tail = min_tail.min(tail);
    }
    Ok((min_tail * rows as f64).min(1.0))
}

/// Column-wise variant of [`block_structure_test`], for cross layers whose
/// structure is column-oriented.
pub fn block_structure_test_columns(w: &WeightTensor) -> Result<f64> {
    if w.rank() != 2 {
        return Err(Error::InvalidShape("block structure test expects a rank-2 tensor".into()));
    }
    let (rows, cols) = (w.rows(), w.cols());
    let mut t = Vec::with_capacity(w.len());
    for j in 0..cols {
        for i in 0..rows {
            t.push(w.at(i, j));
        }
    }
    block_structure_test(&WeightTensor::fc(cols, rows, t, w.layer_index())?)
}

/// Verdict for one layer of a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerVerdict {
    pub layer_index: usize,
    pub p_value: f64,
    pub suspicious: bool,
    /// Which orientation produced the reported p-value.
    pub column_wise: bool,
}

/// Run the detector over a network's weight tensors. Odd layers (0-based
/// even indices) are tested row-wise, cross layers column-wise; conv tensors
/// are flattened filter-major first. `alpha` is the suspicion threshold.
pub fn detection_report(weights: &[WeightTensor], alpha: f64) -> Result<Vec<LayerVerdict>> {
    weights
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let flat;
            let mat = if w.rank() == 4 {
                flat = flatten_conv_filter_major(w)?;
                &flat
            } else {
                w
            };
            let column_wise = i % 2 == 1;
            let p_value = if column_wise {
                block_structure_test_columns(mat)?
            } else {
                block_structure_test(mat)?
            };
            Ok(LayerVerdict { layer_index: i, p_value, suspicious: p_value < alpha, column_wise })
        })
        .collect()
}

/// View a conv tensor as filters x (fh * fw * channels), one row per filter.
pub fn flatten_conv_filter_major(w: &WeightTensor) -> Result<WeightTensor> {
    if w.rank() != 4 {
        return Err(Error::InvalidShape("expected a rank-4 tensor".into()));
    }
    let (fh, fw, c, f) = w.conv_dims();
    let mut data = Vec::with_capacity(w.len());
    for fi in 0..f {
        for h in 0..fh {
            for x in 0..fw {
                for ch in 0..c {
                    data.push(w.data()[w.conv_index(h, x, ch, fi)]);
                }
            }
        }
    }
    WeightTensor::fc(f, fh * fw * c, data, w.layer_index())
}

/// Grayscale pixels for a rank-2 tensor: values map symmetrically from
/// [-max|w|, +max|w|] to [0, 255], so zero is mid-gray. Returns (pixels,
/// width, height) in row-major order, ready for PGM encoding.
pub fn weight_heatmap_pixels(w: &WeightTensor) -> Result<(Vec<u8>, usize, usize)> {
    if w.rank() != 2 {
        return Err(Error::InvalidShape(
            "heatmap expects a rank-2 tensor; flatten conv tensors filter-major first".into(),
        ));
    }
    let max_abs = w.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let pixels = w
        .data()
        .iter()
        .map(|&v| {
            if max_abs == 0.0 {
                128
            } else {
                round((v + max_abs) / (2.0 * max_abs) * 255.0).clamp(0.0, 255.0) as u8
            }
        })
        .collect();
    Ok((pixels, w.cols(), w.rows()))
}

/// Per-conv-layer channel flags: true means the channel's post-ReLU output
/// was zero for every probe input.
pub fn filter_activation_report(net: &Network, probes: &[Vec<f64>]) -> Result<Vec<Vec<bool>>> {
    let shapes = net.layer_shapes()?;
    let conv_layers: Vec<(usize, usize)> = shapes
        .iter()
        .enumerate()
        .filter_map(|(i, s)| match s.as_slice() {
            [_, _, c] => Some((i, *c)),
            _ => None,
        })
        .collect();
    if conv_layers.is_empty() {
        return Err(Error::InvalidShape("network has no convolutional layers".into()));
    }
    let mut dead: Vec<Vec<bool>> = conv_layers.iter().map(|(_, c)| alloc::vec![true; *c]).collect();
    for probe in probes {
        let outs = net.layer_outputs(probe)?;
        for (k, (li, c)) in conv_layers.iter().enumerate() {
            let out = &outs[*li];
            let positions = out.len() / c;
            for ch in 0..*c {
                if dead[k][ch] {
                    let fired = (0..positions).any(|p| out[p * c + ch] > 0.0);
                    if fired {
                        dead[k][ch] = false;
                    }
                }
            }
        }
    }
    Ok(dead)
}

/// Remediation: uniformly re-permute every weight tensor's entries (shapes
/// and biases untouched). Undoes any placement structure while preserving
/// each tensor's multiset exactly.
pub fn reshuffle_weights(net: &Network, seed: u64) -> Result<Network> {
    let root = Rng::new(seed);
    let mut out = net.clone();
    let shuffled: Vec<WeightTensor> = net
        .weights()
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let perm = root.child(i as u64).permutation(w.len());
            permute_components(w, &perm)
        })
        .collect::<Result<_>>()?;
    out.set_weights(shuffled)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::{attack_network, AttackConfig, Placement};
    use crate::init::{init_layer, BiasPolicy, InitKind, InitializerSpec};

    fn he(rows: usize, cols: usize, seed: u64) -> WeightTensor {
        let spec = InitializerSpec { kind: InitKind::He, bias_policy: BiasPolicy::Zero };
        init_layer(&spec, &[rows, cols], &mut Rng::new(seed)).unwrap().0
    }

    #[test]
    fn attacked_matrix_detected_both_placements() {
        for (i, placement) in [Placement::Stable, Placement::Shuffled(5)].into_iter().enumerate() {
            let w = he(32, 32, 200 + i as u64);
            let cfg = AttackConfig::soft_knockout(0.5).with_placement(placement);
            let attacked = attack_network(&[w], &cfg).unwrap();
            let p = block_structure_test(&attacked[0]).unwrap();
            assert!(p < 1e-6, "placement {placement:?}: p = {p}");
        }
    }

    #[test]
    fn cross_layer_detected_column_wise() {
        let w = he(32, 32, 210);
        let cfg = AttackConfig::shift(0).with_start_parity(true);
        let attacked = attack_network(&[w], &cfg).unwrap();
        let p = block_structure_test_columns(&attacked[0]).unwrap();
        assert!(p < 1e-6, "p = {p}");
    }

    #[test]
    fn clean_matrices_rarely_flagged() {
        let mut flagged = 0;
        for seed in 0..300 {
            let w = he(32, 32, 300 + seed);
            if block_structure_test(&w).unwrap() < 0.01 {
                flagged += 1;
            }
        }
        // Expected false-positive rate is below alpha; allow a little slack.
        assert!(flagged <= 6, "{flagged}/300 clean matrices flagged");
    }

    #[test]
    fn all_equal_matrix_is_uninformative() {
        let w = WeightTensor::fc(4, 4, alloc::vec![0.25; 16], 0).unwrap();
        assert_eq!(block_structure_test(&w).unwrap(), 1.0);
    }

    #[test]
    fn rejects_degenerate_shapes() {
        let w = WeightTensor::fc(3, 4, alloc::vec![0.1; 12], 0).unwrap();
        assert!(block_structure_test(&w).is_err());
    }

    #[test]
    fn heatmap_all_zero_is_mid_gray() {
        let w = WeightTensor::fc(4, 4, alloc::vec![0.0; 16], 0).unwrap();
        let (px, width, height) = weight_heatmap_pixels(&w).unwrap();
        assert_eq!((width, height), (4, 4));
        assert!(px.iter().all(|&p| p == 128));
    }

    #[test]
    fn heatmap_shows_attacked_block_contrast() {
        // Attacked 784x392: the small-value top half renders visibly darker.
        let w = he(784, 392, 220);
        let attacked = attack_network(&[w.clone()], &AttackConfig::soft_knockout(0.5)).unwrap();
        let (px, width, height) = weight_heatmap_pixels(&attacked[0]).unwrap();
        let half = height / 2 * width;
        let top: f64 = px[..half].iter().map(|&p| p as f64).sum::<f64>() / half as f64;
        let bottom: f64 = px[half..].iter().map(|&p| p as f64).sum::<f64>() / half as f64;
        assert!(bottom - top >= 40.0, "contrast {}", bottom - top);
        // Clean matrix: halves indistinguishable.
        let (px, ..) = weight_heatmap_pixels(&w).unwrap();
        let top: f64 = px[..half].iter().map(|&p| p as f64).sum::<f64>() / half as f64;
        let bottom: f64 = px[half..].iter().map(|&p| p as f64).sum::<f64>() / half as f64;
        assert!((top - bottom).abs() <= 2.0, "clean contrast {}", top - bottom);
    }

    #[test]
    fn reshuffle_preserves_multiset_and_clears_structure() {
        use crate::nn::{LayerSpec, Network, NetworkSpec};
        let spec = NetworkSpec {
            input_shape: alloc::vec![32],
            layers: alloc::vec![LayerSpec::Dense { width: 32 }, LayerSpec::Dense { width: 32 }],
            initializer: InitializerSpec { kind: InitKind::He, bias_policy: BiasPolicy::Zero },
            dropout_rate: 0.0,
        };
        let mut net = Network::init(spec, 230).unwrap();
        net.apply_attack(&AttackConfig::soft_knockout(0.5)).unwrap();
        let fixed = reshuffle_weights(&net, 231).unwrap();
        for (a, b) in net.weights().iter().zip(fixed.weights()) {
            let mut sa = a.data().to_vec();
            let mut sb = b.data().to_vec();
            sa.sort_by(f64::total_cmp);
            sb.sort_by(f64::total_cmp);
            assert_eq!(sa, sb);
        }
        let p = block_structure_test(&fixed.weights()[0]).unwrap();
        assert!(p > 1e-3, "p = {p} still looks structured");
    }

    #[test]
    fn conv_flatten_is_filter_major() {
        let mut data = alloc::vec![0.0; 2 * 2 * 2 * 3];
        let w0 = WeightTensor::conv(2, 2, 2, 3, data.clone(), 0).unwrap();
        // Mark filter 2's entries.
        for h in 0..2 {
            for x in 0..2 {
                for c in 0..2 {
                    data[w0.conv_index(h, x, c, 2)] = 1.0;
                }
            }
        }
        let w = WeightTensor::conv(2, 2, 2, 3, data, 0).unwrap();
        let flat = flatten_conv_filter_major(&w).unwrap();
        assert_eq!(flat.shape(), &[3, 8]);
        assert!(flat.data()[16..].iter().all(|&v| v == 1.0));
        assert!(flat.data()[..16].iter().all(|&v| v == 0.0));
    }
}
