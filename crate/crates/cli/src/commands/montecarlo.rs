//! `montecarlo`: measure deactivation frequencies on an actually attacked
//! He layer and print them next to the closed-form predictions.

use anyhow::Result;
use clap::Args;
use malinit_core::analysis::{p_zero_from_ratio, ratio_large, ratio_small, LayerStatsInput};
use malinit_core::attack::{attack_network, AttackConfig};
use malinit_core::init::{init_layer, BiasPolicy, InitKind, InitializerSpec};
use malinit_core::montecarlo::{estimate_p_zero, InputDistribution, McConfig};
use malinit_core::rng::Rng;
use std::io::Write;
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long, default_value_t = 0.5)]
    pub r: f64,
    /// Input dimension of the layer.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Neurons in the layer (split between the two blocks).
    #[arg(long, default_value_t = 32)]
    pub rows: usize,
    #[arg(long = "bias-ratio", default_value_t = 0.0)]
    pub bias_ratio: f64,
    /// sigma_x^2 / mu_x^2; 1/3 selects uniform-[0,1] inputs, anything else a
    /// Normal(1, sqrt(sharpness)) probe distribution.
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub sharpness: f64,
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    /// Independent tensor draws the trial budget is spread over; averaging
    /// across draws washes out the per-tensor fluctuation of the block
    /// statistics.
    #[arg(long, default_value_t = 4)]
    pub tensors: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output CSV path (stdout when omitted).
    #[arg(long = "out")]
    pub output: Option<PathBuf>,
}

/// Probe distribution and its mean for a requested sharpness.
pub fn input_for_sharpness(sharpness: f64) -> (InputDistribution, f64) {
    if (sharpness - 1.0 / 3.0).abs() < 1e-9 {
        (InputDistribution::Uniform01, 0.5)
    } else {
        (
            InputDistribution::Normal {
                mean: 1.0,
                std: sharpness.sqrt(),
                truncated_at_zero: false,
            },
            1.0,
        )
    }
}

/// Build attacked He layers and measure block-averaged dead frequencies,
/// spreading the trial budget over `tensors` independent draws.
///
/// The attack uses Shuffled placement: the closed-form estimate models each
/// row as an i.i.d. sample from its block's truncated distribution, which is
/// the paper's "randomly distributed within the block" layout. Stable
/// placement would give each row a narrow quantile slice instead and the
/// per-row frequencies would not be comparable.
#[allow(clippy::too_many_arguments)]
pub fn measure_block_frequencies(
    r: f64,
    n: usize,
    rows: usize,
    bias_ratio: f64,
    sharpness: f64,
    trials: usize,
    tensors: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let tensors = tensors.max(1);
    let sigma_a = (2.0 / n as f64).sqrt();
    let (input, mu_x) = input_for_sharpness(sharpness);
    let spec = InitializerSpec { kind: InitKind::He, bias_policy: BiasPolicy::Zero };
    let bias = vec![bias_ratio * sigma_a * mu_x; rows];
    let k_small = (r * (rows * n) as f64).round() as usize;
    let full_small_rows = k_small / n;
    let first_large_row = k_small.div_ceil(n);
    let mut small_sum = 0.0;
    let mut large_sum = 0.0;
    for t in 0..tensors as u64 {
        let (w, _) = init_layer(&spec, &[rows, n], &mut Rng::new(seed.wrapping_add(t)))
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        let cfg = AttackConfig::soft_knockout(r)
            .with_placement(malinit_core::attack::Placement::Shuffled(seed ^ (0x51AB + t)));
        let attacked = attack_network(&[w], &cfg).map_err(|e| anyhow::anyhow!("{e}"))?;
        let mc = McConfig {
            trials: (trials / tensors).max(1000),
            input,
            seed: (seed ^ 0x5eed).wrapping_add(t),
        };
        let freqs = estimate_p_zero(&attacked[0], &bias, &mc).map_err(|e| anyhow::anyhow!("{e}"))?;
        // The boundary row is mixed and excluded from both block averages.
        let mean = |v: &[f64]| {
            if v.is_empty() {
                f64::NAN
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        small_sum += mean(&freqs[..full_small_rows]);
        large_sum += mean(&freqs[first_large_row..]);
    }
    Ok((small_sum / tensors as f64, large_sum / tensors as f64))
}

pub fn run(args: &McArgs) -> Result<()> {
    let (mc_small, mc_large) = measure_block_frequencies(
        args.r,
        args.n,
        args.rows,
        args.bias_ratio,
        args.sharpness,
        args.trials,
        args.tensors,
        args.seed,
    )?;
    let input = LayerStatsInput {
        n: args.n,
        bias_ratio: args.bias_ratio,
        sharpness: args.sharpness,
        r: args.r,
    };
    let an_small = p_zero_from_ratio(ratio_small(&input).map_err(|e| anyhow::anyhow!("{e}"))?);
    let an_large = p_zero_from_ratio(ratio_large(&input).map_err(|e| anyhow::anyhow!("{e}"))?);
    let mut out = String::from(
        "r,n,bias_ratio,sharpness,trials,p_zero_small_mc,p_zero_large_mc,p_zero_small_analytic,p_zero_large_analytic\n",
    );
    out.push_str(&format!(
        "{},{},{},{},{},{mc_small:.6},{mc_large:.6},{an_small:.6},{an_large:.6}\n",
        args.r, args.n, args.bias_ratio, args.sharpness, args.trials
    ));
    match &args.output {
        Some(path) => std::fs::write(path, out)?,
        None => std::io::stdout().write_all(out.as_bytes())?,
    }
    Ok(())
}
