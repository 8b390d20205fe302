//! Subcommand implementations.

pub mod analyze;
pub mod attack;
pub mod detect;
pub mod experiment;
pub mod knockout;
pub mod montecarlo;
pub mod train;
pub mod undo;

use crate::config::DatasetConfig;
use anyhow::{Context, Result};
use malinit_core::data::Dataset;
use std::fs;
use std::path::Path;

/// Build the dataset a config refers to.
pub fn resolve_dataset(cfg: &DatasetConfig) -> Result<Dataset> {
    match cfg {
        DatasetConfig::Blobs { classes, dim, per_class, separation, seed } => {
            malinit_core::data::gaussian_blobs(*classes, *dim, *per_class, *separation, *seed)
                .map_err(|e| anyhow::anyhow!("{e}"))
        }
        DatasetConfig::Csv { path, label_column, has_header, split_fraction, split_seed } => {
            crate::dataio::load_csv(path, *label_column, *has_header, *split_fraction, *split_seed)
        }
        DatasetConfig::Idx {
            images,
            labels,
            test_images,
            test_labels,
            split_fraction,
            split_seed,
            flatten,
        } => crate::dataio::load_idx(
            images,
            labels,
            test_images.as_deref(),
            test_labels.as_deref(),
            *split_fraction,
            *split_seed,
            *flatten,
        ),
        DatasetConfig::Cache { path } => crate::dataio::load_dataset_cache(path),
    }
}

/// Write a binary PGM (P5) grayscale image.
pub fn write_pgm(path: &Path, pixels: &[u8], width: usize, height: usize) -> Result<()> {
    let mut buf = format!("P5\n{width} {height}\n255\n").into_bytes();
    buf.extend_from_slice(pixels);
    fs::write(path, buf).with_context(|| format!("writing {}", path.display()))
}

/// Parse a comma-separated list of values.
pub fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|_| anyhow::anyhow!("cannot parse '{t}' as {what}"))
        })
        .collect()
}
