//! Dataset loaders: numeric CSV, IDX image/label pairs, and a cache format
//! built on the tensor container.

use crate::container::{read_tensor, write_tensor};
use anyhow::{bail, Context, Result};
use malinit_core::data::{normalize_min_max, split_indices, Dataset};
use malinit_core::WeightTensor;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Read;
use std::path::Path;

/// Load a numeric CSV. Every cell must parse as a number; the label column
/// must hold integer values (they are remapped to contiguous class ids in
/// sorted order). Features are min-max normalized per column.
pub fn load_csv(
    path: &Path,
    label_column: usize,
    has_header: bool,
    split_fraction: f64,
    seed: u64,
) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut raw_labels: Vec<i64> = Vec::new();
    let mut features: Vec<f64> = Vec::new();
    let mut dim: Option<usize> = None;
    for (row, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("reading row {row}"))?;
        if record.len() <= label_column {
            bail!("row {row} has {} columns, label column is {label_column}", record.len());
        }
        let this_dim = record.len() - 1;
        match dim {
            None => dim = Some(this_dim),
            Some(d) if d != this_dim => {
                bail!("row {row} has {} feature columns, expected {d}", this_dim)
            }
            _ => {}
        }
        for (col, cell) in record.iter().enumerate() {
            if cell.is_empty() {
                bail!("missing value at row {row}, column {col}");
            }
            let value: f64 = cell
                .parse()
                .map_err(|_| anyhow::anyhow!("non-numeric cell '{cell}' at row {row}, column {col}"))?;
            if col == label_column {
                if value.fract() != 0.0 {
                    bail!("label '{cell}' at row {row} is not an integer");
                }
                raw_labels.push(value as i64);
            } else {
                features.push(value);
            }
        }
    }
    let dim = dim.unwrap_or(0);
    if raw_labels.is_empty() || dim == 0 {
        bail!("{} contains no usable rows", path.display());
    }
    let mut classes: Vec<i64> = raw_labels.clone();
    classes.sort_unstable();
    classes.dedup();
    let labels: Vec<usize> = raw_labels
        .iter()
        .map(|l| classes.binary_search(l).unwrap())
        .collect();
    normalize_min_max(&mut features, dim);
    let (train_idx, test_idx) =
        split_indices(labels.len(), split_fraction, seed).map_err(|e| anyhow::anyhow!("{e}"))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    let ds = Dataset {
        name,
        features,
        dim,
        input_shape: vec![dim],
        labels,
        classes: classes.len(),
        train_idx,
        test_idx,
    };
    ds.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(ds)
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32_be(f: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    f.read_exact(&mut b).context("IDX file truncated")?;
    Ok(u32::from_be_bytes(b))
}

fn read_idx_images(path: &Path) -> Result<(Vec<f64>, usize, usize)> {
    let mut f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let magic = read_u32_be(&mut f)?;
    if magic != IDX_IMAGES_MAGIC {
        bail!("{}: expected image magic 0x00000803, got {magic:#010x}", path.display());
    }
    let count = read_u32_be(&mut f)? as usize;
    let h = read_u32_be(&mut f)? as usize;
    let w = read_u32_be(&mut f)? as usize;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes)?;
    if bytes.len() != count * h * w {
        bail!(
            "{}: expected {} pixel bytes, found {}",
            path.display(),
            count * h * w,
            bytes.len()
        );
    }
    Ok((bytes.into_iter().map(|b| b as f64 / 255.0).collect(), h, w))
}

fn read_idx_labels(path: &Path) -> Result<Vec<usize>> {
    let mut f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let magic = read_u32_be(&mut f)?;
    if magic != IDX_LABELS_MAGIC {
        bail!("{}: expected label magic 0x00000801, got {magic:#010x}", path.display());
    }
    let count = read_u32_be(&mut f)? as usize;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes)?;
    if bytes.len() != count {
        bail!("{}: expected {count} label bytes, found {}", path.display(), bytes.len());
    }
    Ok(bytes.into_iter().map(|b| b as usize).collect())
}

/// Load an IDX image/label pair. When a test pair is supplied those samples
/// become the test split; otherwise the train data is split by fraction.
#[allow(clippy::too_many_arguments)]
pub fn load_idx(
    images: &Path,
    labels: &Path,
    test_images: Option<&Path>,
    test_labels: Option<&Path>,
    split_fraction: f64,
    seed: u64,
    flatten: bool,
) -> Result<Dataset> {
    let (mut features, h, w) = read_idx_images(images)?;
    let mut labels_v = read_idx_labels(labels)?;
    if features.len() / (h * w) != labels_v.len() {
        bail!("image and label counts differ");
    }
    let n_train_files = labels_v.len();
    let (train_idx, test_idx) = match (test_images, test_labels) {
        (Some(ti), Some(tl)) => {
            let (tf, th, tw) = read_idx_images(ti)?;
            if (th, tw) != (h, w) {
                bail!("test images are {th}x{tw}, train images are {h}x{w}");
            }
            let tl = read_idx_labels(tl)?;
            if tf.len() / (h * w) != tl.len() {
                bail!("test image and label counts differ");
            }
            features.extend(tf);
            labels_v.extend(tl);
            (
                (0..n_train_files).collect::<Vec<_>>(),
                (n_train_files..labels_v.len()).collect::<Vec<_>>(),
            )
        }
        (None, None) => {
            split_indices(labels_v.len(), split_fraction, seed).map_err(|e| anyhow::anyhow!("{e}"))?
        }
        _ => bail!("test images and test labels must be given together"),
    };
    let classes = labels_v.iter().copied().max().map(|m| m + 1).unwrap_or(0);
    let input_shape = if flatten { vec![h * w] } else { vec![h, w, 1] };
    let ds = Dataset {
        name: images
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "idx".into()),
        features,
        dim: h * w,
        input_shape,
        labels: labels_v,
        classes,
        train_idx,
        test_idx,
    };
    ds.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(ds)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CacheMeta {
    name: String,
    input_shape: Vec<usize>,
    classes: usize,
    train_idx: Vec<usize>,
    test_idx: Vec<usize>,
}

/// Save a dataset as tensor containers plus a JSON meta file.
pub fn save_dataset_cache(dir: &Path, ds: &Dataset) -> Result<()> {
    fs::create_dir_all(dir)?;
    let features = WeightTensor::new(vec![ds.n_samples(), ds.dim], ds.features.clone(), 0)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    write_tensor(&dir.join("features.mlnt"), &features)?;
    let labels = WeightTensor::new(
        vec![ds.labels.len()],
        ds.labels.iter().map(|&l| l as f64).collect(),
        0,
    )
    .map_err(|e| anyhow::anyhow!("{e}"))?;
    write_tensor(&dir.join("labels.mlnt"), &labels)?;
    let meta = CacheMeta {
        name: ds.name.clone(),
        input_shape: ds.input_shape.clone(),
        classes: ds.classes,
        train_idx: ds.train_idx.clone(),
        test_idx: ds.test_idx.clone(),
    };
    fs::write(dir.join("dataset.json"), serde_json::to_string(&meta)?)?;
    Ok(())
}

pub fn load_dataset_cache(dir: &Path) -> Result<Dataset> {
    let meta: CacheMeta = serde_json::from_str(
        &fs::read_to_string(dir.join("dataset.json"))
            .with_context(|| format!("reading {}/dataset.json", dir.display()))?,
    )?;
    let features = read_tensor(&dir.join("features.mlnt"))?;
    let labels = read_tensor(&dir.join("labels.mlnt"))?;
    let ds = Dataset {
        name: meta.name,
        dim: features.shape()[1],
        features: features.data().to_vec(),
        input_shape: meta.input_shape,
        labels: labels.data().iter().map(|&v| v as usize).collect(),
        classes: meta.classes,
        train_idx: meta.train_idx,
        test_idx: meta.test_idx,
    };
    ds.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(ds)
}
