//! `analyze`: emit the closed-form deactivation probabilities over a
//! parameter grid as CSV.

use super::parse_list;
use anyhow::Result;
use clap::Args;
use malinit_core::analysis::{p_zero_from_ratio, ratio_large, ratio_small, LayerStatsInput};
use std::io::Write;
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Comma-separated split ratios in (0,1).
    #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    pub r: String,
    /// Comma-separated input dimensions.
    #[arg(long, default_value = "50,100,784")]
    pub n: String,
    /// Comma-separated bias ratios a/(sigma_A mu_x).
    #[arg(long = "bias-ratio", default_value = "0")]
    pub bias_ratio: String,
    /// Comma-separated input sharpness values sigma_x^2/mu_x^2.
    #[arg(long, default_value = "0.3333333333333333")]
    pub sharpness: String,
    /// Output CSV path (stdout when omitted).
    #[arg(long = "out")]
    pub output: Option<PathBuf>,
}

pub fn run(args: &AnalyzeArgs) -> Result<()> {
    let rs: Vec<f64> = parse_list(&args.r, "a ratio")?;
    let ns: Vec<usize> = parse_list(&args.n, "a dimension")?;
    let biases: Vec<f64> = parse_list(&args.bias_ratio, "a bias ratio")?;
    let sharps: Vec<f64> = parse_list(&args.sharpness, "a sharpness")?;
    let mut out = String::from("r,n,bias_ratio,sharpness,p_zero_small_block,p_zero_large_block\n");
    for &r in &rs {
        for &n in &ns {
            for &bias_ratio in &biases {
                for &sharpness in &sharps {
                    let input = LayerStatsInput { n, bias_ratio, sharpness, r };
                    let ps = p_zero_from_ratio(ratio_small(&input).map_err(|e| anyhow::anyhow!("{e}"))?);
                    let pl = p_zero_from_ratio(ratio_large(&input).map_err(|e| anyhow::anyhow!("{e}"))?);
                    out.push_str(&format!(
                        "{r},{n},{bias_ratio},{sharpness},{ps:.9},{pl:.9}\n"
                    ));
                }
            }
        }
    }
    match &args.output {
        Some(path) => std::fs::write(path, out)?,
        None => std::io::stdout().write_all(out.as_bytes())?,
    }
    Ok(())
}
