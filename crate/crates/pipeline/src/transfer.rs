//! Continued training on new geometries mixed with replayed original data.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::eval::{evaluate, EvalReport};
use crate::features::TrainingPoint;
use crate::train::{continue_training, EpochStats, GruConfig, TrainedGru};
use crate::{PipelineError, Result};

pub const DEFAULT_REPLAY: usize = 5000;
pub const DEFAULT_EPOCHS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct TransferConfig {
    /// Optimizer settings; `epochs` is the number of transfer epochs.
    pub train: GruConfig,
    pub replay: usize,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            train: GruConfig {
                epochs: DEFAULT_EPOCHS,
                ..GruConfig::default()
            },
            replay: DEFAULT_REPLAY,
        }
    }
}

/// Before/after evaluations on the held-out original designs and on the new
/// geometries.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferReport {
    pub test2_before: EvalReport,
    pub test2_after: EvalReport,
    pub new_before: EvalReport,
    pub new_after: EvalReport,
    pub trace: Vec<EpochStats>,
}

impl TransferReport {
    /// Relative change of mean Test2 rMAE per output (positive = worse).
    pub fn test2_change(&self) -> [f64; 4] {
        std::array::from_fn(|o| (self.test2_after.mean[o] - self.test2_before.mean[o]) / self.test2_before.mean[o])
    }

    pub fn new_change(&self) -> [f64; 4] {
        std::array::from_fn(|o| (self.new_after.mean[o] - self.new_before.mean[o]) / self.new_before.mean[o])
    }
}

/// Uniform sample without replacement of `count` points (all if fewer).
pub fn replay_sample<'a>(base_train: &[&'a TrainingPoint], count: usize, seed: u64) -> Vec<&'a TrainingPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = count.min(base_train.len());
    let mut idx = sample(&mut rng, base_train.len(), n).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| base_train[i]).collect()
}

/// Retrains a copy of `base` on `new_train` plus replayed `base_train` points.
pub fn transfer_train(
    base: &TrainedGru,
    new_train: &[&TrainingPoint],
    new_holdout: &[&TrainingPoint],
    base_train: &[&TrainingPoint],
    test2: &[&TrainingPoint],
    cfg: &TransferConfig,
) -> Result<(TrainedGru, TransferReport)> {
    if new_train.is_empty() {
        return Err(PipelineError::Invalid("no new-geometry training points".into()));
    }
    let test2_before = evaluate(base, "test2", test2)?;
    let new_before = evaluate(base, "new", new_holdout)?;
    let mut mixed: Vec<&TrainingPoint> = new_train.to_vec();
    mixed.extend(replay_sample(base_train, cfg.replay, cfg.train.seed));
    let mut model = base.clone();
    let trace = continue_training(&mut model, &mixed, &[], &cfg.train)?;
    let report = TransferReport {
        test2_after: evaluate(&model, "test2", test2)?,
        new_after: evaluate(&model, "new", new_holdout)?,
        test2_before,
        new_before,
        trace,
    };
    Ok((model, report))
}
