//! `train`: one seeded training run from a JSON config; writes a checkpoint,
//! the per-epoch trace, and a manifest echo.

use super::resolve_dataset;
use crate::config::{load_config, ExperimentConfigFile};
use anyhow::{Context, Result};
use clap::Args;
use malinit_core::exp::{override_training, MaliciousOverride};
use malinit_core::nn::{Network, TrainConfig, TrainingTrace};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON config (dataset, network, train, optional attack).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides the config's `output`).
    #[arg(long = "out")]
    pub output: Option<PathBuf>,
    /// Seed (overrides the config's `train.seed`).
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn write_trace_csv(path: &Path, trace: &TrainingTrace) -> Result<()> {
    let mut out = String::from("epoch,train_loss,test_loss,test_accuracy\n");
    for e in &trace.epochs {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6}\n",
            e.epoch, e.train_loss, e.test_loss, e.test_accuracy
        ));
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Resolve the effective (train config, network spec) pair including any
/// malicious hyper-parameter overrides.
pub fn effective_configs(
    cfg: &ExperimentConfigFile,
    input_shape: Vec<usize>,
) -> Result<(TrainConfig, malinit_core::nn::NetworkSpec)> {
    let mut train = cfg.train.to_config()?;
    let mut spec = cfg.network.to_spec(input_shape)?;
    if let Some(lr) = cfg.override_learning_rate {
        (train, spec) = override_training(&train, &spec, MaliciousOverride::LearningRate(lr))
            .map_err(|e| anyhow::anyhow!("{e}"))?;
    }
    if let Some(p) = cfg.override_dropout {
        (train, spec) = override_training(&train, &spec, MaliciousOverride::DropoutRate(p))
            .map_err(|e| anyhow::anyhow!("{e}"))?;
    }
    Ok((train, spec))
}

pub fn run(args: &TrainArgs) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let out_dir = args
        .output
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("train_out"));
    let data = resolve_dataset(&cfg.dataset)?;
    let (mut train, spec) = effective_configs(&cfg, data.input_shape.clone())?;
    if let Some(seed) = args.seed {
        train.seed = seed;
    }
    let mut net = Network::init(spec, train.seed).map_err(|e| anyhow::anyhow!("{e}"))?;
    if let Some(attack) = &cfg.attack {
        net.apply_attack(&attack.to_config()?).map_err(|e| anyhow::anyhow!("{e}"))?;
    }
    let trace = net.train(&data, &train).map_err(|e| anyhow::anyhow!("{e}"))?;

    std::fs::create_dir_all(&out_dir)?;
    let mut metrics = BTreeMap::new();
    metrics.insert("best_accuracy".to_string(), trace.best_accuracy);
    metrics.insert("best_epoch".to_string(), trace.best_epoch as f64);
    metrics.insert("final_loss".to_string(), trace.final_loss);
    crate::container::save_checkpoint(
        &out_dir.join("checkpoint"),
        &net,
        &data.name,
        trace.epochs.len() - 1,
        metrics,
    )?;
    write_trace_csv(&out_dir.join("trace.csv"), &trace)?;
    std::fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&cfg)?)?;
    println!(
        "seed {}: best accuracy {:.4} at epoch {} (final train loss {:.4})",
        train.seed, trace.best_accuracy, trace.best_epoch, trace.final_loss
    );
    println!("outputs in {}", out_dir.display());
    Ok(())
}
