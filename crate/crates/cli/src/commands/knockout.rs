//! `knockout`: the optimization-based attack for small dense networks.
//! Reads a checkpoint (or synthesizes a fresh He network from widths),
//! minimizes the total class output under fixed Frobenius norms, and writes
//! the modified weights plus the objective trace.

use super::parse_list;
use crate::container;
use anyhow::{bail, Result};
use clap::Args;
use malinit_core::init::{init_layer, BiasPolicy, InitKind, InitializerSpec};
use malinit_core::knockout::{optimize_knockout, KnockoutProblem};
use malinit_core::rng::Rng;
use malinit_core::WeightTensor;
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct KnockoutArgs {
    /// Input checkpoint directory; alternative to --widths.
    #[arg(long = "in", conflicts_with = "widths")]
    pub input: Option<PathBuf>,
    /// Synthesize a fresh He network, e.g. "14,7,7,2".
    #[arg(long)]
    pub widths: Option<String>,
    /// Leading matrices to optimize.
    #[arg(long, default_value_t = 2)]
    pub free: usize,
    #[arg(long, default_value_t = 256)]
    pub probes: usize,
    #[arg(long, default_value_t = 500)]
    pub iterations: usize,
    #[arg(long = "step", default_value_t = 0.1)]
    pub step_size: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long = "out")]
    pub output: PathBuf,
}

pub fn run(args: &KnockoutArgs) -> Result<()> {
    let weights: Vec<WeightTensor> = if let Some(dir) = &args.input {
        let (net, _) = container::load_checkpoint(dir)?;
        net.weights()
    } else if let Some(widths) = &args.widths {
        let dims: Vec<usize> = parse_list(widths, "a width")?;
        if dims.len() < 2 {
            bail!("--widths needs at least input and one layer, e.g. 14,7");
        }
        let spec = InitializerSpec { kind: InitKind::He, bias_policy: BiasPolicy::Zero };
        let mut rng = Rng::new(args.seed);
        dims.windows(2)
            .enumerate()
            .map(|(i, pair)| {
                let (w, _) = init_layer(&spec, &[pair[1], pair[0]], &mut rng)
                    .map_err(|e| anyhow::anyhow!("{e}"))?;
                Ok(WeightTensor::new(w.shape().to_vec(), w.data().to_vec(), i)
                    .map_err(|e| anyhow::anyhow!("{e}"))?)
            })
            .collect::<Result<_>>()?
    } else {
        bail!("give either --in <checkpoint> or --widths <dims>");
    };

    let n_free = args.free.min(weights.len());
    let mut problem = KnockoutProblem::surrogate(&weights, n_free, args.probes, args.seed)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    problem.iterations = args.iterations;
    problem.step_size = args.step_size;
    let initial_norms: Vec<f64> = problem.free.iter().map(|w| w.frobenius_norm()).collect();
    let result = optimize_knockout(&problem).map_err(|e| anyhow::anyhow!("{e}"))?;

    std::fs::create_dir_all(&args.output)?;
    for (i, w) in result.weights.iter().enumerate() {
        container::write_tensor(&args.output.join(format!("free_{i:03}.mlnt")), w)?;
    }
    let mut trace = String::from("step,objective\n");
    for (i, j) in result.objective_trace.iter().enumerate() {
        trace.push_str(&format!("{i},{j:.6}\n"));
    }
    std::fs::write(args.output.join("objective_trace.csv"), trace)?;

    let first = result.objective_trace[0];
    let last = *result.objective_trace.last().unwrap();
    for (w, n0) in result.weights.iter().zip(&initial_norms) {
        let drift = (w.frobenius_norm() - n0).abs() / n0;
        if drift > 1e-6 {
            bail!("Frobenius norm drifted by {drift:.2e}");
        }
    }
    println!(
        "objective {first:.4} -> {last:.4} ({:.1}% reduction), norms preserved",
        100.0 * (1.0 - last / first.max(1e-300))
    );
    println!("outputs in {}", args.output.display());
    Ok(())
}
