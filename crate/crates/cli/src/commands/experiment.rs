//! `experiment`: the many-seed protocol. Baseline and (when configured)
//! attacked runs share the same fixed seed list; per-seed records are
//! written as they finish so an interrupted experiment resumes by skipping
//! completed seeds; distributions are summarized as KDE and histogram CSVs.

use super::resolve_dataset;
use crate::config::{load_config, ExperimentConfigFile};
use anyhow::{Context, Result};
use clap::Args;
use malinit_core::attack::AttackConfig;
use malinit_core::data::Dataset;
use malinit_core::exp::{run_seed, ExperimentRecord};
use malinit_core::nn::{NetworkSpec, TrainConfig};
use malinit_core::stats::{histogram, kde};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides the config's `output`).
    #[arg(long = "out")]
    pub output: Option<PathBuf>,
    /// Seed-level parallelism; results are identical for any value.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeedRecordFile {
    seed: u64,
    best_accuracy: f64,
    best_epoch: usize,
    final_loss: f64,
    wall_seconds: f64,
    diverged: bool,
}

impl From<&ExperimentRecord> for SeedRecordFile {
    fn from(r: &ExperimentRecord) -> Self {
        SeedRecordFile {
            seed: r.seed,
            best_accuracy: r.best_accuracy,
            best_epoch: r.best_epoch,
            final_loss: r.final_loss,
            wall_seconds: r.wall_seconds,
            diverged: r.diverged,
        }
    }
}

impl From<SeedRecordFile> for ExperimentRecord {
    fn from(r: SeedRecordFile) -> Self {
        ExperimentRecord {
            seed: r.seed,
            best_accuracy: r.best_accuracy,
            best_epoch: r.best_epoch,
            final_loss: r.final_loss,
            wall_seconds: r.wall_seconds,
            diverged: r.diverged,
        }
    }
}

fn seed_record_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join("seeds").join(format!("seed_{seed:05}.json"))
}

/// Run one variant (baseline or attacked) over the seed list, resuming from
/// any per-seed records already on disk. Records are returned sorted by seed.
pub fn run_variant(
    dir: &Path,
    data: &Dataset,
    spec: &NetworkSpec,
    train: &TrainConfig,
    attack: Option<&AttackConfig>,
    seeds: &[u64],
) -> Result<Vec<ExperimentRecord>> {
    std::fs::create_dir_all(dir.join("seeds"))?;
    let mut records: Vec<ExperimentRecord> = Vec::with_capacity(seeds.len());
    let mut todo: Vec<u64> = Vec::new();
    for &seed in seeds {
        let path = seed_record_path(dir, seed);
        if path.is_file() {
            let rec: SeedRecordFile = serde_json::from_str(&std::fs::read_to_string(&path)?)
                .with_context(|| format!("parsing {}", path.display()))?;
            records.push(rec.into());
        } else {
            todo.push(seed);
        }
    }
    let fresh: Vec<ExperimentRecord> = todo
        .par_iter()
        .map(|&seed| {
            let started = Instant::now();
            let mut rec = run_seed(data, spec, train, attack, seed)
                .map_err(|e| anyhow::anyhow!("seed {seed}: {e}"))?;
            rec.wall_seconds = started.elapsed().as_secs_f64();
            let file = SeedRecordFile::from(&rec);
            std::fs::write(
                seed_record_path(dir, seed),
                serde_json::to_string_pretty(&file)?,
            )?;
            Ok(rec)
        })
        .collect::<Result<_>>()?;
    records.extend(fresh);
    records.sort_by_key(|r| r.seed);
    Ok(records)
}

pub fn write_records_csv(path: &Path, records: &[ExperimentRecord]) -> Result<()> {
    let mut out = String::from("seed,best_acc,best_epoch,final_loss,wall_s\n");
    for r in records {
        out.push_str(&format!(
            "{},{:.6},{},{:.6},{:.3}\n",
            r.seed, r.best_accuracy, r.best_epoch, r.final_loss, r.wall_seconds
        ));
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn read_records_csv(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut records = Vec::new();
    for line in text.lines().skip(1) {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            anyhow::bail!("malformed records line: {line}");
        }
        records.push(ExperimentRecord {
            seed: parts[0].parse()?,
            best_accuracy: parts[1].parse()?,
            best_epoch: parts[2].parse()?,
            final_loss: parts[3].parse()?,
            wall_seconds: parts[4].parse()?,
            diverged: false,
        });
    }
    Ok(records)
}

fn write_distributions(dir: &Path, records: &[ExperimentRecord], epochs: usize) -> Result<()> {
    let accuracies: Vec<f64> = records.iter().map(|r| r.best_accuracy).collect();
    if accuracies.len() >= 2 {
        let curve = kde(&accuracies, None).map_err(|e| anyhow::anyhow!("{e}"))?;
        let mut out = String::from("x,density\n");
        for (x, d) in curve.xs.iter().zip(&curve.density) {
            out.push_str(&format!("{x:.6},{d:.6}\n"));
        }
        std::fs::write(dir.join("kde_accuracy.csv"), out)?;
    }
    let best_epochs: Vec<usize> = records.iter().map(|r| r.best_epoch).collect();
    let bins = (epochs / 20).max(1);
    let hist = histogram(&best_epochs, bins.min(epochs.max(1))).map_err(|e| anyhow::anyhow!("{e}"))?;
    let mut out = String::from("bin_lo,bin_hi,count\n");
    for b in &hist {
        out.push_str(&format!("{:.3},{:.3},{}\n", b.lo, b.hi, b.count));
    }
    std::fs::write(dir.join("hist_epoch.csv"), out)?;
    Ok(())
}

fn summarize(records: &[ExperimentRecord]) -> (f64, f64) {
    let mut accs: Vec<f64> = records.iter().map(|r| r.best_accuracy).collect();
    accs.sort_by(f64::total_cmp);
    let median = accs[accs.len() / 2];
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    (median, mean)
}

pub fn run(args: &ExperimentArgs) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let out_dir = args
        .output
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("experiment_out"));
    let jobs = args.jobs.or(cfg.jobs);
    run_with(&cfg, &out_dir, jobs)
}

pub fn run_with(cfg: &ExperimentConfigFile, out_dir: &Path, jobs: Option<usize>) -> Result<()> {
    if let Some(jobs) = jobs {
        // A per-call pool keeps repeated invocations (tests) happy.
        let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
        return pool.install(|| run_inner(cfg, out_dir));
    }
    run_inner(cfg, out_dir)
}

fn run_inner(cfg: &ExperimentConfigFile, out_dir: &Path) -> Result<()> {
    let data = resolve_dataset(&cfg.dataset)?;
    let (train, spec) = super::train::effective_configs(cfg, data.input_shape.clone())?;
    let seeds = cfg.seeds.resolve();
    if seeds.is_empty() {
        anyhow::bail!("empty seed list");
    }
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(cfg)?)?;

    let attack = cfg.attack.as_ref().map(|a| a.to_config()).transpose()?;
    let mut variants: Vec<(&str, Option<&AttackConfig>)> = vec![("baseline", None)];
    if let Some(atk) = &attack {
        variants.push(("attack", Some(atk)));
    }
    for (name, atk) in variants {
        let dir = out_dir.join(name);
        let records = run_variant(&dir, &data, &spec, &train, atk, &seeds)?;
        write_records_csv(&dir.join("records.csv"), &records)?;
        write_distributions(&dir, &records, train.epochs)?;
        let (median, mean) = summarize(&records);
        println!(
            "{name}: {} seeds, median best accuracy {median:.4}, mean {mean:.4}",
            records.len()
        );
    }
    println!("outputs in {}", out_dir.display());
    Ok(())
}
