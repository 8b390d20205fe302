//! Independent oracles for the closed-form analysis: large Monte Carlo
//! samples, empirical block statistics of actually attacked tensors, brute
//! force log-factorials, and forward-pass knockout checks.

use malinit_core::analysis::{permutation_chance_log10, split_stats};
use malinit_core::attack::{attack_network, AttackConfig};
use malinit_core::init::{init_layer, BiasPolicy, InitKind, InitializerSpec};
use malinit_core::montecarlo::{active_neuron_count, McConfig};
use malinit_core::nn::{LayerSpec, Network, NetworkSpec};
use malinit_core::rng::Rng;

fn he_spec() -> InitializerSpec {
    InitializerSpec { kind: InitKind::He, bias_policy: BiasPolicy::Zero }
}

/// Monte Carlo oracle for the block moments: split 10^7 standard normal
/// draws at the r-quantile boundary (the sign boundary for r = 1/2) and
/// measure each block's mean and variance directly.
fn block_moments_oracle(r: f64, draws: usize, seed: u64) -> (f64, f64, f64, f64) {
    let mut rng = Rng::new(seed);
    let mut values: Vec<f64> = (0..draws).map(|_| rng.normal()).collect();
    values.sort_by(f64::total_cmp);
    let k = (r * draws as f64).round() as usize;
    let stats = |xs: &[f64]| {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        (mean, var)
    };
    let (ms, vs) = stats(&values[..k]);
    let (ml, vl) = stats(&values[k..]);
    (ms, vs, ml, vl)
}

#[test]
fn split_stats_match_monte_carlo_at_half() {
    let (ms, vs, ml, vl) = block_moments_oracle(0.5, 10_000_000, 71);
    let s = split_stats(0.5, 1.0).unwrap();
    assert!((s.mu_s - ms).abs() < 1e-3, "mu_s {} vs {}", s.mu_s, ms);
    assert!((s.mu_l - ml).abs() < 1e-3, "mu_l {} vs {}", s.mu_l, ml);
    assert!((s.var_s - vs).abs() < 1e-3, "var_s {} vs {}", s.var_s, vs);
    assert!((s.var_l - vl).abs() < 1e-3, "var_l {} vs {}", s.var_l, vl);
}

#[test]
fn split_stats_match_monte_carlo_off_center() {
    for (r, seed) in [(0.2, 72), (0.7, 73)] {
        let (ms, _, ml, _) = block_moments_oracle(r, 2_000_000, seed);
        let s = split_stats(r, 1.0).unwrap();
        assert!((s.mu_s - ms).abs() < 3e-3, "r={r}: mu_s {} vs {}", s.mu_s, ms);
        assert!((s.mu_l - ml).abs() < 3e-3, "r={r}: mu_l {} vs {}", s.mu_l, ml);
    }
}

#[test]
fn split_stats_match_attacked_tensor_blocks() {
    // An actually attacked He tensor with >= 1e5 entries: the leading rows
    // hold the small block; means must agree within 1% relative.
    let (rows, cols) = (400, 300);
    let sigma = (2.0f64 / cols as f64).sqrt();
    let (w, _) = init_layer(&he_spec(), &[rows, cols], &mut Rng::new(74)).unwrap();
    let r = 0.5;
    let attacked = attack_network(&[w], &AttackConfig::soft_knockout(r)).unwrap();
    let data = attacked[0].data();
    let k = (r * data.len() as f64).round() as usize;
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let (emp_s, emp_l) = (mean(&data[..k]), mean(&data[k..]));
    let s = split_stats(r, sigma).unwrap();
    assert!((emp_s - s.mu_s).abs() <= 0.01 * s.mu_s.abs(), "{emp_s} vs {}", s.mu_s);
    assert!((emp_l - s.mu_l).abs() <= 0.01 * s.mu_l.abs(), "{emp_l} vs {}", s.mu_l);
}

#[test]
fn permutation_chance_matches_brute_force_log_factorials() {
    // Brute force: log10 k! by direct summation.
    let log10_fact = |k: usize| -> f64 { (1..=k).map(|i| (i as f64).log10()).sum() };
    for (m, n, r) in [(2usize, 2usize, 0.5f64), (10, 10, 0.3), (784, 392, 0.5), (1000, 1000, 0.5)] {
        let mn = m * n;
        let k = (r * mn as f64).round() as usize;
        let want = log10_fact(k) + log10_fact(mn - k) - log10_fact(mn);
        let got = permutation_chance_log10(m, n, r).unwrap();
        assert!(
            (got - want).abs() <= 1e-9 * want.abs().max(1.0),
            "({m},{n},{r}): {got} vs {want}"
        );
    }
}

fn fc_net(widths: &[usize], input: usize, seed: u64) -> Network {
    let spec = NetworkSpec {
        input_shape: vec![input],
        layers: widths.iter().map(|&w| LayerSpec::Dense { width: w }).collect(),
        initializer: he_spec(),
        dropout_rate: 0.0,
    };
    Network::init(spec, seed).unwrap()
}

#[test]
fn full_knockout_kills_every_output() {
    // r = 1/2 (or shift s = 0), zero bias, widths >= 100: over 1e4 uniform
    // inputs, outputs are zero with frequency >= 0.999.
    for (cfg, seed) in [
        (AttackConfig::soft_knockout(0.5), 81u64),
        (AttackConfig::shift(0), 82),
    ] {
        let mut net = fc_net(&[128, 128], 128, seed);
        net.apply_attack(&cfg).unwrap();
        let mut rng = Rng::new(90 + seed);
        let mut nonzero = 0usize;
        let mut total = 0usize;
        for _ in 0..10_000 {
            let x: Vec<f64> = (0..128).map(|_| rng.uniform()).collect();
            let outs = net.layer_outputs(&x).unwrap();
            nonzero += outs[1].iter().filter(|&&v| v > 0.0).count();
            total += outs[1].len();
        }
        let frac = nonzero as f64 / total as f64;
        assert!(frac <= 0.001, "{cfg:?}: nonzero fraction {frac}");
    }
}

#[test]
fn knocked_out_net_output_is_input_independent() {
    // With every hidden path dead, softmax sees constant logits: any two
    // inputs produce identical class probabilities.
    let mut net = fc_net(&[128, 128, 4], 128, 83);
    net.apply_attack(&AttackConfig::shift(0)).unwrap();
    let mut rng = Rng::new(84);
    let a: Vec<f64> = (0..128).map(|_| rng.uniform()).collect();
    let b: Vec<f64> = (0..128).map(|_| rng.uniform()).collect();
    let pa = net.forward(&[a]).unwrap();
    let pb = net.forward(&[b]).unwrap();
    for (x, y) in pa[0].iter().zip(&pb[0]) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn shift_leaves_exactly_s_active_neurons_full_grid() {
    for s in [1usize, 4, 8, 16] {
        let mut net = fc_net(&[128, 128], 128, 1000 + s as u64);
        net.apply_attack(&AttackConfig::shift(s)).unwrap();
        let counts = active_neuron_count(&net, &McConfig::uniform(10_000, 85)).unwrap();
        assert_eq!(counts[1], s, "s={s}: {counts:?}");
    }
}

#[test]
fn conv_knockout_forward_oracle() {
    // Two conv layers, 16 channels, r = 1/2, s = 0, zero bias: after the
    // second layer at most 1% of outputs are nonzero over 1e3 random images.
    let spec = NetworkSpec {
        input_shape: vec![6, 6, 1],
        layers: vec![
            LayerSpec::Conv { fh: 3, fw: 3, filters: 16 },
            LayerSpec::Conv { fh: 3, fw: 3, filters: 16 },
            LayerSpec::Flatten,
            LayerSpec::Dense { width: 2 },
        ],
        initializer: he_spec(),
        dropout_rate: 0.0,
    };
    let mut net = Network::init(spec, 86).unwrap();
    net.apply_attack(&AttackConfig::conv_shift(0, 1)).unwrap();
    let mut rng = Rng::new(87);
    let mut nonzero = 0usize;
    let mut total = 0usize;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..36).map(|_| rng.uniform()).collect();
        let outs = net.layer_outputs(&x).unwrap();
        nonzero += outs[1].iter().filter(|&&v| v > 0.0).count();
        total += outs[1].len();
    }
    let frac = nonzero as f64 / total as f64;
    assert!(frac <= 0.01, "nonzero fraction after conv layer 2: {frac}");
}

#[test]
fn conv_attack_flags_half_the_first_layer_channels() {
    use malinit_core::detect::filter_activation_report;
    let spec = NetworkSpec {
        input_shape: vec![6, 6, 1],
        layers: vec![
            LayerSpec::Conv { fh: 3, fw: 3, filters: 16 },
            LayerSpec::Conv { fh: 3, fw: 3, filters: 16 },
            LayerSpec::Flatten,
            LayerSpec::Dense { width: 2 },
        ],
        initializer: he_spec(),
        dropout_rate: 0.0,
    };
    let mut net = Network::init(spec, 88).unwrap();
    net.apply_attack(&AttackConfig::conv_shift(0, 1)).unwrap();
    let mut rng = Rng::new(89);
    let probes: Vec<Vec<f64>> = (0..64)
        .map(|_| (0..36).map(|_| rng.uniform()).collect())
        .collect();
    let report = filter_activation_report(&net, &probes).unwrap();
    // First conv layer: the leading 8 filters hold the small block. The
    // boundary filter can pick up a few near-zero positive entries (the
    // count split lands where the sample's sign boundary may not), so it is
    // only very likely dead, matching the attack's probabilistic nature.
    let dead_first_half = (0..8).filter(|&ch| report[0][ch]).count();
    assert!(dead_first_half >= 7, "only {dead_first_half}/8 leading channels dead");
    for ch in 8..16 {
        assert!(!report[0][ch], "channel {ch} should be alive");
    }
    // Second layer: everything dead.
    assert!(report[1].iter().all(|&d| d));

    // A clean net fires everywhere.
    let clean = Network::init(net.spec().clone(), 90).unwrap();
    let report = filter_activation_report(&clean, &probes).unwrap();
    let dead: usize = report.iter().flatten().filter(|&&d| d).count();
    assert_eq!(dead, 0, "clean net has dead channels: {report:?}");
}
