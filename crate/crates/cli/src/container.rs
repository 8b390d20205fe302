//! Tensor container and checkpoint formats.
//!
//! A tensor file is a flat binary container: magic bytes "MLNT", a version
//! byte, a rank byte, the shape as 64-bit little-endian integers, then the
//! entries as 64-bit IEEE-754 little-endian floats. A JSON sidecar at
//! `<path>.json` carries metadata (currently the layer index).
//!
//! A checkpoint is a directory with one container per parameter tensor plus
//! `manifest.json` (network architecture, epoch, metrics).

use crate::config::NetworkConfig;
use anyhow::{bail, Context, Result};
use malinit_core::nn::Network;
use malinit_core::WeightTensor;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

const MAGIC: &[u8; 4] = b"MLNT";
const VERSION: u8 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TensorSidecar {
    #[serde(default)]
    pub layer_index: usize,
}

pub fn write_tensor(path: &Path, w: &WeightTensor) -> Result<()> {
    let mut buf = Vec::with_capacity(6 + 8 * w.rank() + 8 * w.len());
    buf.extend_from_slice(MAGIC);
    buf.push(VERSION);
    buf.push(w.rank() as u8);
    for &d in w.shape() {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in w.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(&buf)?;
    let sidecar = TensorSidecar { layer_index: w.layer_index() };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

pub fn read_tensor(path: &Path) -> Result<WeightTensor> {
    let mut f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut header = [0u8; 6];
    f.read_exact(&mut header).context("reading container header")?;
    if &header[..4] != MAGIC {
        bail!("{} is not a tensor container (bad magic)", path.display());
    }
    if header[4] != VERSION {
        bail!("unsupported container version {}", header[4]);
    }
    let rank = header[5] as usize;
    if rank == 0 || rank > 8 {
        bail!("implausible rank {rank}");
    }
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        let mut b = [0u8; 8];
        f.read_exact(&mut b).context("reading shape")?;
        shape.push(u64::from_le_bytes(b) as usize);
    }
    let len: usize = shape.iter().product();
    let mut data = Vec::with_capacity(len);
    let mut b = [0u8; 8];
    for _ in 0..len {
        f.read_exact(&mut b).context("container truncated")?;
        data.push(f64::from_le_bytes(b));
    }
    let mut trailing = [0u8; 1];
    if f.read(&mut trailing)? != 0 {
        bail!("container has trailing bytes");
    }
    let layer_index = fs::read_to_string(sidecar_path(path))
        .ok()
        .and_then(|t| serde_json::from_str::<TensorSidecar>(&t).ok())
        .map(|s| s.layer_index)
        .unwrap_or(0);
    WeightTensor::new(shape, data, layer_index).map_err(|e| anyhow::anyhow!("{e}"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub name: String,
    pub input_shape: Vec<usize>,
    pub network: NetworkConfig,
    #[serde(default)]
    pub epoch: usize,
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub file: String,
    pub role: String,
    pub layer_index: usize,
}

pub fn save_checkpoint(
    dir: &Path,
    net: &Network,
    name: &str,
    epoch: usize,
    metrics: BTreeMap<String, f64>,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut tensors = Vec::new();
    for (i, w) in net.weights().iter().enumerate() {
        let file = format!("layer_{i:03}.weight.mlnt");
        write_tensor(&dir.join(&file), w)?;
        tensors.push(TensorEntry { file, role: "weight".into(), layer_index: i });
    }
    for (i, b) in net.biases().iter().enumerate() {
        let file = format!("layer_{i:03}.bias.mlnt");
        let t = WeightTensor::new(vec![b.len()], b.clone(), i).map_err(|e| anyhow::anyhow!("{e}"))?;
        write_tensor(&dir.join(&file), &t)?;
        tensors.push(TensorEntry { file, role: "bias".into(), layer_index: i });
    }
    let manifest = CheckpointManifest {
        name: name.into(),
        input_shape: net.spec().input_shape.clone(),
        network: NetworkConfig::from_spec(net.spec()),
        epoch,
        metrics,
        tensors,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn load_manifest(dir: &Path) -> Result<CheckpointManifest> {
    let text = fs::read_to_string(dir.join("manifest.json"))
        .with_context(|| format!("reading {}/manifest.json", dir.display()))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_checkpoint(dir: &Path) -> Result<(Network, CheckpointManifest)> {
    let manifest = load_manifest(dir)?;
    let spec = manifest.network.to_spec(manifest.input_shape.clone())?;
    let mut net = Network::init(spec, 0).map_err(|e| anyhow::anyhow!("{e}"))?;
    let mut weights: Vec<(usize, WeightTensor)> = Vec::new();
    let mut biases: Vec<(usize, Vec<f64>)> = Vec::new();
    for entry in &manifest.tensors {
        let t = read_tensor(&dir.join(&entry.file))?;
        match entry.role.as_str() {
            "weight" => weights.push((entry.layer_index, t)),
            "bias" => biases.push((entry.layer_index, t.data().to_vec())),
            other => bail!("unknown tensor role '{other}'"),
        }
    }
    weights.sort_by_key(|(i, _)| *i);
    biases.sort_by_key(|(i, _)| *i);
    net.set_weights(weights.into_iter().map(|(_, w)| w).collect())
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    net.set_biases(biases.into_iter().map(|(_, b)| b).collect())
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok((net, manifest))
}

/// True if the path looks like a checkpoint directory.
pub fn is_checkpoint(path: &Path) -> bool {
    path.is_dir() && path.join("manifest.json").is_file()
}

#[cfg(test)]
mod tests {
    use super::*;
    use malinit_core::init::{BiasPolicy, InitKind, InitializerSpec};
    use malinit_core::nn::{LayerSpec, NetworkSpec};
    use malinit_core::rng::{normal_sample, Rng};

    #[test]
    fn tensor_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        let mut rng = Rng::new(1);
        let data = normal_sample(&mut rng, 0.0, 1.0, 12).unwrap();
        let w = WeightTensor::new(vec![3, 4], data, 5).unwrap();
        write_tensor(&path, &w).unwrap();
        let back = read_tensor(&path).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bogus.bin");
        fs::write(&path, b"NOPE\x01\x02").unwrap();
        assert!(read_tensor(&path).is_err());
    }

    #[test]
    fn truncated_container_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        let w = WeightTensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0], 0).unwrap();
        write_tensor(&path, &w).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(read_tensor(&path).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = NetworkSpec {
            input_shape: vec![6],
            layers: vec![LayerSpec::Dense { width: 5 }, LayerSpec::Dense { width: 3 }],
            initializer: InitializerSpec {
                kind: InitKind::He,
                bias_policy: BiasPolicy::Constant(0.1),
            },
            dropout_rate: 0.0,
        };
        let net = Network::init(spec, 9).unwrap();
        let mut metrics = BTreeMap::new();
        metrics.insert("best_accuracy".to_string(), 0.93);
        save_checkpoint(dir.path(), &net, "toy", 7, metrics).unwrap();
        let (back, manifest) = load_checkpoint(dir.path()).unwrap();
        assert_eq!(manifest.epoch, 7);
        assert_eq!(manifest.metrics["best_accuracy"], 0.93);
        for (a, b) in net.weights().iter().zip(back.weights()) {
            assert_eq!(a.data(), b.data());
        }
        for (a, b) in net.biases().iter().zip(back.biases()) {
            assert_eq!(a, &b);
        }
    }
}
