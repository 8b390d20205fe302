//! Per-seed experiment runs: initialize, optionally attack, train, record.
//!
//! The many-seed orchestration (parallelism, wall-clock timing, CSV and
//! manifest files) lives in the std companion crate; this module is the pure
//! part every runner shares.

use crate::attack::AttackConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{Network, NetworkSpec, TrainConfig};

/// One seed's outcome. `wall_seconds` is filled in by the runner (this crate
/// has no clock) and is never used in any assertion.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub seed: u64,
    pub best_accuracy: f64,
    pub best_epoch: usize,
    pub final_loss: f64,
    pub wall_seconds: f64,
    pub diverged: bool,
}

/// Train one seed: the seed drives initialization and batch shuffling, the
/// attack (when given) is applied to the freshly initialized weights before
/// the first training step. Divergence is recorded, not fatal.
pub fn run_seed(
    data: &Dataset,
    spec: &NetworkSpec,
    train: &TrainConfig,
    attack: Option<&AttackConfig>,
    seed: u64,
) -> Result<ExperimentRecord> {
    let mut net = Network::init(spec.clone(), seed)?;
    if let Some(cfg) = attack {
        net.apply_attack(cfg)?;
    }
    let cfg = TrainConfig { seed, ..train.clone() };
    match net.train(data, &cfg) {
        Ok(trace) => Ok(ExperimentRecord {
            seed,
            best_accuracy: trace.best_accuracy,
            best_epoch: trace.best_epoch,
            final_loss: trace.final_loss,
            wall_seconds: 0.0,
            diverged: false,
        }),
        Err(Error::Diverged { epoch }) => Ok(ExperimentRecord {
            seed,
            best_accuracy: 0.0,
            best_epoch: epoch,
            final_loss: f64::NAN,
            wall_seconds: 0.0,
            diverged: true,
        }),
        Err(e) => Err(e),
    }
}

/// A maliciously overridden training hyper-parameter (the appendix attacks).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaliciousOverride {
    LearningRate(f64),
    DropoutRate(f64),
}

/// Apply a hyper-parameter override, returning the modified configs.
pub fn override_training(
    train: &TrainConfig,
    spec: &NetworkSpec,
    with: MaliciousOverride,
) -> Result<(TrainConfig, NetworkSpec)> {
    let mut train = train.clone();
    let mut spec = spec.clone();
    match with {
        MaliciousOverride::LearningRate(lr) => {
            if lr <= 0.0 || !lr.is_finite() {
                return Err(Error::InvalidParam(alloc::format!(
                    "overridden learning rate must be positive, got {lr}"
                )));
            }
            train.optimizer = train.optimizer.with_lr(lr);
        }
        MaliciousOverride::DropoutRate(p) => {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::InvalidParam(alloc::format!(
                    "overridden dropout rate must be in [0,1), got {p}"
                )));
            }
            spec.dropout_rate = p;
        }
    }
    Ok((train, spec))
}
