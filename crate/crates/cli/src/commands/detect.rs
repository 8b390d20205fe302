//! `detect`: run the block-structure detector over a tensor or checkpoint,
//! render each layer as a PGM heatmap, and write a JSON report.

use super::write_pgm;
use crate::container;
use anyhow::{bail, Result};
use clap::Args;
use malinit_core::detect::{
    detection_report, filter_activation_report, flatten_conv_filter_major, weight_heatmap_pixels,
};
use malinit_core::rng::Rng;
use malinit_core::WeightTensor;
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Input tensor container or checkpoint directory.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long = "out")]
    pub output: PathBuf,
    /// Suspicion threshold on the per-layer p-value.
    #[arg(long, default_value_t = 1e-6)]
    pub alpha: f64,
    /// Probe inputs for the conv filter-activation report.
    #[arg(long, default_value_t = 64)]
    pub probes: usize,
}

#[derive(Debug, Serialize)]
struct LayerReport {
    layer_index: usize,
    p_value: f64,
    suspicious: bool,
    column_wise: bool,
    heatmap: String,
}

#[derive(Debug, Serialize)]
struct Report {
    alpha: f64,
    verdict: String,
    layers: Vec<LayerReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dead_channels: Option<Vec<Vec<bool>>>,
}

pub fn run(args: &DetectArgs) -> Result<()> {
    let (weights, net) = if container::is_checkpoint(&args.input) {
        let (net, _) = container::load_checkpoint(&args.input)?;
        (net.weights(), Some(net))
    } else if args.input.is_file() {
        (vec![container::read_tensor(&args.input)?], None)
    } else {
        bail!("{} is neither a tensor file nor a checkpoint directory", args.input.display());
    };

    std::fs::create_dir_all(&args.output)?;
    let verdicts = detection_report(&weights, args.alpha).map_err(|e| anyhow::anyhow!("{e}"))?;
    let mut layers = Vec::with_capacity(verdicts.len());
    for (w, v) in weights.iter().zip(&verdicts) {
        let mat: WeightTensor = if w.rank() == 4 {
            flatten_conv_filter_major(w).map_err(|e| anyhow::anyhow!("{e}"))?
        } else {
            w.clone()
        };
        let (pixels, width, height) = weight_heatmap_pixels(&mat).map_err(|e| anyhow::anyhow!("{e}"))?;
        let file = format!("layer_{:03}.pgm", v.layer_index);
        write_pgm(&args.output.join(&file), &pixels, width, height)?;
        layers.push(LayerReport {
            layer_index: v.layer_index,
            p_value: v.p_value,
            suspicious: v.suspicious,
            column_wise: v.column_wise,
            heatmap: file,
        });
    }

    // For conv checkpoints, also report channels that never fire.
    let dead_channels = match &net {
        Some(net) if net.layer_shapes().map_err(|e| anyhow::anyhow!("{e}"))?.iter().any(|s| s.len() == 3) => {
            let mut rng = Rng::new(0x9e0);
            let len = net.input_len();
            let probes: Vec<Vec<f64>> = (0..args.probes.max(1))
                .map(|_| (0..len).map(|_| rng.uniform()).collect())
                .collect();
            Some(filter_activation_report(net, &probes).map_err(|e| anyhow::anyhow!("{e}"))?)
        }
        _ => None,
    };

    let any_suspicious = layers.iter().any(|l| l.suspicious);
    let report = Report {
        alpha: args.alpha,
        verdict: if any_suspicious { "suspicious" } else { "clean" }.into(),
        layers,
        dead_channels,
    };
    std::fs::write(args.output.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    println!("verdict: {}", report.verdict);
    for l in &report.layers {
        println!(
            "  layer {}: p = {:.3e}{}",
            l.layer_index,
            l.p_value,
            if l.suspicious { "  <- suspicious" } else { "" }
        );
    }
    Ok(())
}
