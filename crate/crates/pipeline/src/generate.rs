//! Sampling designs, running the oracle and assembling feature datasets.

use std::collections::BTreeMap;

use lattice_core::geometry::CurveSet;
use lattice_core::keyspace::{sample_from, DesignKey, LOG10_RATE_RANGE, THICKNESS_RANGE_MM};
use lattice_core::oracle::{self, DesignId, MaterialConfig, SimRecord, DEFAULT_FINAL_STRAIN};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::augment::augment;
use crate::autoencoder::LatentTable;
use crate::dataset::Dataset;
use crate::features::build_features;
use crate::{PipelineError, Result};

/// One oracle run to perform.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    pub design: DesignId,
    pub thickness: f64,
    pub strain_rate: f64,
}

/// `n` draws over `keys` with uniform thickness and log-uniform rate.
pub fn sample_key_specs(keys: &[DesignKey], n: usize, seed: u64) -> Vec<SimSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let s = sample_from(&mut rng, keys);
            SimSpec {
                design: DesignId::Key(s.key),
                thickness: s.thickness,
                strain_rate: s.strain_rate,
            }
        })
        .collect()
}

/// `n` draws spread evenly (round robin) over named geometries.
pub fn sample_named_specs(names: &[String], n: usize, seed: u64) -> Vec<SimSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| SimSpec {
            design: DesignId::Named(names[i % names.len()].clone()),
            thickness: rng.gen_range(THICKNESS_RANGE_MM.0..=THICKNESS_RANGE_MM.1),
            strain_rate: 10f64.powf(rng.gen_range(LOG10_RATE_RANGE.0..=LOG10_RATE_RANGE.1)),
        })
        .collect()
}

/// Runs the oracle to the full final strain for each spec, in parallel; the
/// output order follows the input.
pub fn run_sims(specs: &[SimSpec], named: &BTreeMap<String, CurveSet>, mat: &MaterialConfig) -> Result<Vec<SimRecord>> {
    specs
        .par_iter()
        .map(|s| -> Result<SimRecord> {
            Ok(match &s.design {
                DesignId::Key(k) => oracle::simulate(k, s.thickness, s.strain_rate, DEFAULT_FINAL_STRAIN, mat)?,
                DesignId::Named(n) => {
                    let curves = named.get(n).ok_or_else(|| PipelineError::MissingLatent(n.clone()))?;
                    oracle::simulate_curves(n, curves, s.thickness, s.strain_rate, DEFAULT_FINAL_STRAIN, mat)?
                }
            })
        })
        .collect()
}

/// `k` augmented copies of every record, drawn from one seeded stream.
pub fn augment_all(records: &[SimRecord], k: usize, seed: u64) -> Vec<SimRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    records.iter().flat_map(|r| augment(r, &mut rng, k)).collect()
}

/// Feature points for `records` using the latent code of each design.
pub fn build_dataset(records: &[SimRecord], latents: &LatentTable, mat: &MaterialConfig) -> Result<Dataset> {
    let points = records
        .par_iter()
        .map(|r| build_features(r, latents.get(&r.design)?, mat))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::new(points))
}
