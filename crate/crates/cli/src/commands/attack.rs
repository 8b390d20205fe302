//! `attack`: apply an adversarial initialization transform to a stored
//! tensor or a whole checkpoint.

use crate::config::AttackConfigFile;
use crate::container;
use anyhow::{bail, Result};
use clap::Args;
use malinit_core::attack::attack_network;
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct AttackArgs {
    /// soft_knockout | shift | conv_soft_knockout | conv_shift | scale | variance_swap
    #[arg(long)]
    pub kind: String,
    /// Block-split ratio (soft knockout variants).
    #[arg(long, default_value_t = 0.5)]
    pub r: f64,
    /// Shift parameter (shift variants).
    #[arg(long, default_value_t = 0)]
    pub s: usize,
    /// Filters modified on even conv layers.
    #[arg(long, default_value_t = 1)]
    pub attacked_filters: usize,
    /// Multiplier for the scale attack.
    #[arg(long, default_value_t = 1.0)]
    pub factor: f64,
    /// stable | shuffled
    #[arg(long, default_value = "stable")]
    pub placement: String,
    #[arg(long, default_value_t = 0)]
    pub placement_seed: u64,
    /// Treat the first tensor as a cross layer.
    #[arg(long, default_value_t = false)]
    pub start_parity: bool,
    /// Input tensor container or checkpoint directory.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output path (same kind as the input).
    #[arg(long = "out")]
    pub output: PathBuf,
}

pub fn run(args: &AttackArgs) -> Result<()> {
    let file = AttackConfigFile {
        kind: args.kind.clone(),
        r: args.r,
        s: args.s,
        attacked_filters: args.attacked_filters,
        factor: args.factor,
        placement: args.placement.clone(),
        placement_seed: args.placement_seed,
        start_parity: args.start_parity,
    };
    let cfg = file.to_config()?;
    if container::is_checkpoint(&args.input) {
        let (mut net, manifest) = container::load_checkpoint(&args.input)?;
        net.apply_attack(&cfg).map_err(|e| anyhow::anyhow!("{e}"))?;
        container::save_checkpoint(
            &args.output,
            &net,
            &manifest.name,
            manifest.epoch,
            manifest.metrics,
        )?;
        println!("attacked checkpoint written to {}", args.output.display());
    } else if args.input.is_file() {
        let w = container::read_tensor(&args.input)?;
        let out = attack_network(std::slice::from_ref(&w), &cfg).map_err(|e| anyhow::anyhow!("{e}"))?;
        container::write_tensor(&args.output, &out[0])?;
        println!("attacked tensor written to {}", args.output.display());
    } else {
        bail!("{} is neither a tensor file nor a checkpoint directory", args.input.display());
    }
    Ok(())
}
