//! Partitioning into train / validation / Test1 (seen designs) and Test2
//! (held-out designs).

use std::collections::HashSet;

use lattice_core::oracle::DesignId;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::features::PointMeta;
use crate::{PipelineError, Result};

pub const DEFAULT_HELDOUT_KEYS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test1_frac: f64,
    pub heldout: Vec<DesignId>,
    pub seed: u64,
}

impl SplitSpec {
    /// 0.68 / 0.12 / 0.20 of the seen-design points.
    pub fn new(heldout: Vec<DesignId>, seed: u64) -> Self {
        SplitSpec {
            train_frac: 0.68,
            val_frac: 0.12,
            test1_frac: 0.20,
            heldout,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fr = [self.train_frac, self.val_frac, self.test1_frac];
        if fr.iter().any(|f| !(0.0..=1.0).contains(f)) || (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(PipelineError::Invalid(format!("split fractions {fr:?} must be in [0,1] and sum to 1")));
        }
        Ok(())
    }
}

/// Indices into the point list.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test1: Vec<usize>,
    pub test2: Vec<usize>,
}

impl Split {
    pub fn total(&self) -> usize {
        self.train.len() + self.val.len() + self.test1.len() + self.test2.len()
    }
}

/// Picks `count` designs to hold out, uniformly and reproducibly.
pub fn choose_heldout<T: Clone>(designs: &[T], count: usize, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = designs.to_vec();
    v.shuffle(&mut rng);
    v.truncate(count);
    v
}

/// Sends held-out designs to Test2 and shuffles the rest into
/// train / val / Test1 by the spec's fractions.
pub fn split_dataset(points: &[PointMeta], spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let heldout: HashSet<&DesignId> = spec.heldout.iter().collect();
    let mut split = Split::default();
    let mut seen = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if heldout.contains(&p.design) {
            split.test2.push(i);
        } else {
            seen.push(i);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    seen.shuffle(&mut rng);
    let n = seen.len();
    let n_train = (spec.train_frac * n as f64).round() as usize;
    let n_val = ((spec.val_frac * n as f64).round() as usize).min(n - n_train);
    split.train = seen[..n_train].to_vec();
    split.val = seen[n_train..n_train + n_val].to_vec();
    split.test1 = seen[n_train + n_val..].to_vec();

    let mut all: Vec<usize> = [&split.train, &split.val, &split.test1, &split.test2]
        .iter()
        .flat_map(|v| v.iter().copied())
        .collect();
    all.sort_unstable();
    assert!(all.iter().enumerate().all(|(i, &j)| i == j), "partitions overlap or miss points");
    Ok(split)
}
