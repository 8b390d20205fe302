//! JSON configuration schema. Unknown keys are rejected everywhere so a
//! typo'd field fails loudly instead of silently using a default.

use anyhow::{bail, Context, Result};
use malinit_core::attack::{AttackConfig, AttackKind, Placement};
use malinit_core::init::{BiasPolicy, InitKind, InitializerSpec};
use malinit_core::nn::{LayerSpec, NetworkSpec, Optimizer, TrainConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

fn default_split() -> f64 {
    0.8
}

fn default_lr() -> f64 {
    0.001
}

fn default_batch() -> usize {
    32
}

fn default_seed_count() -> usize {
    50
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    Blobs {
        classes: usize,
        dim: usize,
        per_class: usize,
        separation: f64,
        #[serde(default)]
        seed: u64,
    },
    Csv {
        path: PathBuf,
        label_column: usize,
        #[serde(default)]
        has_header: bool,
        #[serde(default = "default_split")]
        split_fraction: f64,
        #[serde(default)]
        split_seed: u64,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        #[serde(default)]
        test_images: Option<PathBuf>,
        #[serde(default)]
        test_labels: Option<PathBuf>,
        #[serde(default = "default_split")]
        split_fraction: f64,
        #[serde(default)]
        split_seed: u64,
        /// Flatten images to a vector (fully connected nets) or keep
        /// [h, w, 1] (convolutional nets).
        #[serde(default = "crate::config::default_true")]
        flatten: bool,
    },
    /// A dataset previously saved with the tensor-container cache format.
    Cache { path: PathBuf },
}

pub fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerConfig {
    Dense { width: usize },
    Conv { fh: usize, fw: usize, filters: usize },
    Maxpool { window: usize },
    Flatten,
}

impl From<&LayerConfig> for LayerSpec {
    fn from(l: &LayerConfig) -> LayerSpec {
        match *l {
            LayerConfig::Dense { width } => LayerSpec::Dense { width },
            LayerConfig::Conv { fh, fw, filters } => LayerSpec::Conv { fh, fw, filters },
            LayerConfig::Maxpool { window } => LayerSpec::MaxPool { window },
            LayerConfig::Flatten => LayerSpec::Flatten,
        }
    }
}

impl From<&LayerSpec> for LayerConfig {
    fn from(l: &LayerSpec) -> LayerConfig {
        match *l {
            LayerSpec::Dense { width } => LayerConfig::Dense { width },
            LayerSpec::Conv { fh, fw, filters } => LayerConfig::Conv { fh, fw, filters },
            LayerSpec::MaxPool { window } => LayerConfig::Maxpool { window },
            LayerSpec::Flatten => LayerConfig::Flatten,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub layers: Vec<LayerConfig>,
    /// "he" or "glorot".
    #[serde(default = "NetworkConfig::default_initializer")]
    pub initializer: String,
    /// Constant bias value; 0 means the zero policy. The paper's conventions
    /// are 0.1 for fully connected nets and 0 for convolutional ones.
    #[serde(default = "NetworkConfig::default_bias")]
    pub bias: f64,
    #[serde(default)]
    pub dropout: f64,
}

impl NetworkConfig {
    fn default_initializer() -> String {
        "he".into()
    }

    fn default_bias() -> f64 {
        0.1
    }

    pub fn to_spec(&self, input_shape: Vec<usize>) -> Result<NetworkSpec> {
        let kind = match self.initializer.as_str() {
            "he" => InitKind::He,
            "glorot" => InitKind::Glorot,
            other => bail!("unknown initializer '{other}' (use \"he\" or \"glorot\")"),
        };
        let bias_policy = if self.bias == 0.0 {
            BiasPolicy::Zero
        } else {
            BiasPolicy::Constant(self.bias)
        };
        Ok(NetworkSpec {
            input_shape,
            layers: self.layers.iter().map(LayerSpec::from).collect(),
            initializer: InitializerSpec { kind, bias_policy },
            dropout_rate: self.dropout,
        })
    }

    pub fn from_spec(spec: &NetworkSpec) -> NetworkConfig {
        NetworkConfig {
            layers: spec.layers.iter().map(LayerConfig::from).collect(),
            initializer: match spec.initializer.kind {
                InitKind::He => "he".into(),
                InitKind::Glorot => "glorot".into(),
            },
            bias: match spec.initializer.bias_policy {
                BiasPolicy::Zero => 0.0,
                BiasPolicy::Constant(v) => v,
            },
            dropout: spec.dropout_rate,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfigFile {
    /// "adam" or "sgd".
    #[serde(default = "TrainConfigFile::default_optimizer")]
    pub optimizer: String,
    #[serde(default = "default_lr")]
    pub lr: f64,
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
}

impl TrainConfigFile {
    fn default_optimizer() -> String {
        "adam".into()
    }

    pub fn to_config(&self) -> Result<TrainConfig> {
        let optimizer = match self.optimizer.as_str() {
            "adam" => Optimizer::adam(self.lr),
            "sgd" => Optimizer::Sgd { lr: self.lr },
            other => bail!("unknown optimizer '{other}' (use \"adam\" or \"sgd\")"),
        };
        Ok(TrainConfig {
            optimizer,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfigFile {
    /// soft_knockout | shift | conv_soft_knockout | conv_shift | scale |
    /// variance_swap
    pub kind: String,
    #[serde(default = "AttackConfigFile::default_r")]
    pub r: f64,
    #[serde(default)]
    pub s: usize,
    #[serde(default = "AttackConfigFile::default_filters")]
    pub attacked_filters: usize,
    #[serde(default = "AttackConfigFile::default_factor")]
    pub factor: f64,
    /// "stable" or "shuffled".
    #[serde(default = "AttackConfigFile::default_placement")]
    pub placement: String,
    #[serde(default)]
    pub placement_seed: u64,
    #[serde(default)]
    pub start_parity: bool,
}

impl AttackConfigFile {
    fn default_r() -> f64 {
        0.5
    }

    fn default_filters() -> usize {
        1
    }

    fn default_factor() -> f64 {
        1.0
    }

    fn default_placement() -> String {
        "stable".into()
    }

    pub fn to_config(&self) -> Result<AttackConfig> {
        let kind = match self.kind.as_str() {
            "soft_knockout" => AttackKind::SoftKnockout,
            "shift" => AttackKind::Shift,
            "conv_soft_knockout" => AttackKind::ConvSoftKnockout,
            "conv_shift" => AttackKind::ConvShift,
            "scale" => AttackKind::ScaleWeights,
            "variance_swap" => AttackKind::VarianceSwap,
            other => bail!("unknown attack kind '{other}'"),
        };
        let placement = match self.placement.as_str() {
            "stable" => Placement::Stable,
            "shuffled" => Placement::Shuffled(self.placement_seed),
            other => bail!("unknown placement '{other}' (use \"stable\" or \"shuffled\")"),
        };
        let cfg = AttackConfig {
            kind,
            r: self.r,
            s: self.s,
            attacked_filters: self.attacked_filters,
            scale_factor: self.factor,
            placement,
            start_parity: self.start_parity,
        };
        cfg.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedsConfig {
    #[serde(default)]
    pub base: Option<u64>,
    #[serde(default = "default_seed_count")]
    pub count: usize,
    #[serde(default)]
    pub list: Option<Vec<u64>>,
}

impl Default for SeedsConfig {
    fn default() -> Self {
        SeedsConfig { base: None, count: default_seed_count(), list: None }
    }
}

impl SeedsConfig {
    /// The fixed seed list shared by baseline and attacked runs. The
    /// MALINIT_SEED environment variable overrides the base.
    pub fn resolve(&self) -> Vec<u64> {
        if let Some(list) = &self.list {
            return list.clone();
        }
        let base = std::env::var("MALINIT_SEED")
            .ok()
            .and_then(|v| v.parse::<u64>().ok())
            .or(self.base)
            .unwrap_or(1);
        (0..self.count as u64).map(|i| base + i).collect()
    }
}

/// Top-level config consumed by `train` and `experiment`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfigFile {
    pub dataset: DatasetConfig,
    pub network: NetworkConfig,
    pub train: TrainConfigFile,
    #[serde(default)]
    pub attack: Option<AttackConfigFile>,
    #[serde(default)]
    pub seeds: SeedsConfig,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub jobs: Option<usize>,
    /// Alternative-attack override: set to make the run use a malicious
    /// learning rate or dropout rate instead of a permutation attack.
    #[serde(default)]
    pub override_learning_rate: Option<f64>,
    #[serde(default)]
    pub override_dropout: Option<f64>,
}

pub fn load_config(path: &Path) -> Result<ExperimentConfigFile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let cfg: ExperimentConfigFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{
            "dataset": {"kind": "blobs", "classes": 4, "dim": 20, "per_class": 10, "separation": 6.0},
            "network": {"layers": [{"type": "dense", "width": 4}]},
            "train": {"epochs": 1},
            "typo_field": 1
        }"#;
        assert!(serde_json::from_str::<ExperimentConfigFile>(text).is_err());
        let nested = r#"{
            "dataset": {"kind": "blobs", "classes": 4, "dim": 20, "per_class": 10, "separation": 6.0, "oops": 2},
            "network": {"layers": [{"type": "dense", "width": 4}]},
            "train": {"epochs": 1}
        }"#;
        assert!(serde_json::from_str::<ExperimentConfigFile>(nested).is_err());
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let text = r#"{
            "dataset": {"kind": "blobs", "classes": 4, "dim": 20, "per_class": 10, "separation": 6.0},
            "network": {"layers": [{"type": "dense", "width": 64}, {"type": "dense", "width": 4}]},
            "train": {"epochs": 5}
        }"#;
        let cfg: ExperimentConfigFile = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.train.batch_size, 32);
        assert_eq!(cfg.train.lr, 0.001);
        assert_eq!(cfg.network.bias, 0.1);
        assert!(cfg.attack.is_none());
        let spec = cfg.network.to_spec(vec![20]).unwrap();
        assert_eq!(spec.layers.len(), 2);
        let train = cfg.train.to_config().unwrap();
        assert_eq!(train.optimizer, Optimizer::adam(0.001));
    }

    #[test]
    fn attack_config_round_trip() {
        let text = r#"{"kind": "shift", "s": 8, "placement": "shuffled", "placement_seed": 7}"#;
        let cfg: AttackConfigFile = serde_json::from_str(text).unwrap();
        let atk = cfg.to_config().unwrap();
        assert_eq!(atk.kind, AttackKind::Shift);
        assert_eq!(atk.s, 8);
        assert_eq!(atk.placement, Placement::Shuffled(7));
    }

    #[test]
    fn seed_list_resolution() {
        let cfg = SeedsConfig { base: Some(10), count: 3, list: None };
        assert_eq!(cfg.resolve(), vec![10, 11, 12]);
        let cfg = SeedsConfig { base: None, count: 2, list: Some(vec![5, 9]) };
        assert_eq!(cfg.resolve(), vec![5, 9]);
    }
}
