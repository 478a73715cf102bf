//! Skeleton-image autoencoder training and latent codes.

use std::collections::{BTreeMap, HashMap};

use lattice_core::geometry::{self, CurveSet};
use lattice_core::oracle::DesignId;
use lattice_core::raster::{self, BitImage, PIXELS};
use lattice_nn::{AdamState, Autoencoder, LossKind, Matrix};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::features::LATENT_DIM;
use crate::{PipelineError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AeConfig {
    pub hidden: usize,
    pub latent: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub decay: f64,
    pub seed: u64,
}

impl Default for AeConfig {
    fn default() -> Self {
        AeConfig {
            hidden: 100,
            latent: LATENT_DIM,
            epochs: 80,
            batch_size: 50,
            lr0: 1e-2,
            decay: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeEpoch {
    pub epoch: usize,
    /// Mean batch MSE over the epoch.
    pub train_loss: f64,
}

fn to_matrix(images: &[&BitImage]) -> Matrix {
    let mut m = Matrix::zeros(images.len(), PIXELS);
    for (i, img) in images.iter().enumerate() {
        m.row_mut(i).copy_from_slice(&img.to_unit_vec());
    }
    m
}

pub fn fresh_autoencoder(cfg: &AeConfig) -> Autoencoder {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Autoencoder::new(PIXELS, cfg.hidden, cfg.latent, &mut rng)
}

/// Trains under MSE reconstruction loss with Adam.
pub fn train_autoencoder(images: &[BitImage], cfg: &AeConfig) -> Result<(Autoencoder, Vec<AeEpoch>)> {
    if images.len() < cfg.batch_size || cfg.batch_size == 0 {
        return Err(PipelineError::Invalid(format!(
            "{} images for batch size {}",
            images.len(),
            cfg.batch_size
        )));
    }
    let mut ae = fresh_autoencoder(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let steps = images.len().div_ceil(cfg.batch_size);
    let mut adam = AdamState::new(&ae, cfg.lr0, cfg.decay, steps as u64);
    let mut order: Vec<usize> = (0..images.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&BitImage> = chunk.iter().map(|&i| &images[i]).collect();
            let x = to_matrix(&batch);
            let (loss, grads) = ae.loss_and_grads(&x, LossKind::Mse)?;
            if !loss.is_finite() {
                return Err(PipelineError::Diverged {
                    epoch: epoch + 1,
                    batch: b,
                    what: "non-finite autoencoder loss".into(),
                });
            }
            adam.step(&mut ae, &grads).map_err(|e| PipelineError::Diverged {
                epoch: epoch + 1,
                batch: b,
                what: e.to_string(),
            })?;
            total += loss * chunk.len() as f64;
        }
        let train_loss = total / images.len() as f64;
        log::debug!("autoencoder epoch {} mse {train_loss:.6}", epoch + 1);
        trace.push(AeEpoch {
            epoch: epoch + 1,
            train_loss,
        });
    }
    Ok((ae, trace))
}

/// Binarized reconstructions of `images`.
pub fn reconstruct(ae: &Autoencoder, images: &[BitImage]) -> Result<Vec<BitImage>> {
    let mut out = Vec::with_capacity(images.len());
    for chunk in images.chunks(64) {
        let refs: Vec<&BitImage> = chunk.iter().collect();
        let rec = ae.reconstruct(&to_matrix(&refs))?;
        for r in 0..rec.rows {
            out.push(BitImage::from_intensities(rec.row(r))?);
        }
    }
    Ok(out)
}

/// Dice score of each image against its binarized reconstruction.
pub fn dsc_scores(ae: &Autoencoder, images: &[BitImage]) -> Result<Vec<f64>> {
    Ok(reconstruct(ae, images)?
        .iter()
        .zip(images)
        .map(|(r, i)| raster::dsc(i, r))
        .collect())
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Skeleton image of a design: key lattices use the fixed key frame, named
/// geometries are looked up in `named` and framed the same way.
pub fn design_image(design: &DesignId, named: &BTreeMap<String, CurveSet>) -> Result<BitImage> {
    match design {
        DesignId::Key(k) => Ok(raster::render_key(k)),
        DesignId::Named(n) => {
            let curves = named.get(n).ok_or_else(|| PipelineError::MissingLatent(n.clone()))?;
            Ok(raster::rasterize(&geometry::image_frame(curves)).image)
        }
    }
}

/// Latent codes per design.
#[derive(Debug, Clone, Default)]
pub struct LatentTable {
    pub codes: HashMap<DesignId, Vec<f64>>,
}

impl LatentTable {
    pub fn build<'a>(
        ae: &Autoencoder,
        designs: impl IntoIterator<Item = &'a DesignId>,
        named: &BTreeMap<String, CurveSet>,
    ) -> Result<Self> {
        let mut ids: Vec<DesignId> = designs.into_iter().cloned().collect();
        ids.sort();
        ids.dedup();
        let mut codes = HashMap::with_capacity(ids.len());
        for chunk in ids.chunks(64) {
            let images = chunk
                .iter()
                .map(|d| design_image(d, named))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&BitImage> = images.iter().collect();
            let z = ae.encode(&to_matrix(&refs))?;
            for (i, d) in chunk.iter().enumerate() {
                codes.insert(d.clone(), z.row(i).to_vec());
            }
        }
        Ok(LatentTable { codes })
    }

    pub fn get(&self, design: &DesignId) -> Result<&[f64]> {
        self.codes
            .get(design)
            .map(Vec::as_slice)
            .ok_or_else(|| PipelineError::MissingLatent(design.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lattice_core::keyspace::enumerate_keys;

    fn key_images(n: usize) -> Vec<BitImage> {
        enumerate_keys().unique.iter().take(n).map(raster::render_key).collect()
    }

    #[test]
    fn untrained_model_scores_near_chance() {
        let ae = fresh_autoencoder(&AeConfig::default());
        let scores = dsc_scores(&ae, &key_images(20)).unwrap();
        assert!(mean(&scores) < 0.2, "{}", mean(&scores));
    }

    #[test]
    fn short_run_reduces_loss_and_latents_have_right_size() {
        let images = key_images(12);
        let cfg = AeConfig {
            epochs: 6,
            batch_size: 4,
            ..AeConfig::default()
        };
        let (ae, trace) = train_autoencoder(&images, &cfg).unwrap();
        assert_eq!(trace.len(), 6);
        assert!(trace.last().unwrap().train_loss < trace[0].train_loss);
        let designs: Vec<DesignId> = enumerate_keys().unique[..3].iter().map(|&k| k.into()).collect();
        let table = LatentTable::build(&ae, &designs, &BTreeMap::new()).unwrap();
        for d in &designs {
            assert_eq!(table.get(d).unwrap().len(), LATENT_DIM);
        }
        assert!(table.get(&DesignId::Named("nope".into())).is_err());
        assert!(train_autoencoder(&images[..3], &cfg).is_err());
    }
}
