//! `undo`: shuffle remediation. Re-permutes every weight tensor uniformly,
//! destroying any adversarial placement while keeping each tensor's entry
//! multiset (and therefore mean, variance, shape) exactly.

use crate::container;
use anyhow::{bail, Result};
use clap::Args;
use malinit_core::detect::reshuffle_weights;
use malinit_core::rng::Rng;
use malinit_core::tensor::permute_components;
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct UndoArgs {
    /// Input tensor container or checkpoint directory.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long = "out")]
    pub output: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

pub fn run(args: &UndoArgs) -> Result<()> {
    if container::is_checkpoint(&args.input) {
        let (net, manifest) = container::load_checkpoint(&args.input)?;
        let fixed = reshuffle_weights(&net, args.seed).map_err(|e| anyhow::anyhow!("{e}"))?;
        container::save_checkpoint(
            &args.output,
            &fixed,
            &manifest.name,
            manifest.epoch,
            manifest.metrics,
        )?;
        println!("reshuffled checkpoint written to {}", args.output.display());
    } else if args.input.is_file() {
        let w = container::read_tensor(&args.input)?;
        let perm = Rng::new(args.seed).permutation(w.len());
        let out = permute_components(&w, &perm).map_err(|e| anyhow::anyhow!("{e}"))?;
        container::write_tensor(&args.output, &out)?;
        println!("reshuffled tensor written to {}", args.output.display());
    } else {
        bail!("{} is neither a tensor file nor a checkpoint directory", args.input.display());
    }
    Ok(())
}
