//! GRU surrogate training.

use std::io::Write;

use lattice_nn::weights::WeightFile;
use lattice_nn::{AdamState, GruRegressor, LossKind, Matrix, ScalerParams};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::features::{TrainingPoint, FEATURE_LAYOUT_VERSION, N_FEATURES, N_OUTPUTS};
use crate::{PipelineError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GruConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub decay: f64,
    pub seed: u64,
    pub loss: LossKind,
}

impl Default for GruConfig {
    fn default() -> Self {
        GruConfig {
            hidden: vec![300, 300, 300],
            epochs: 150,
            batch_size: 600,
            lr0: 1e-3,
            decay: 0.1,
            seed: 0,
            loss: LossKind::Mae,
        }
    }
}

/// One row of the convergence trace. Losses are on standard-scaled targets;
/// validation entries are NaN without a validation set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_mse: f64,
    pub val_mse: f64,
}

pub const TRACE_HEADER: &str = "epoch,train_loss,val_loss,train_mse,val_mse";

pub fn write_trace_csv<W: Write>(trace: &[EpochStats], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for s in trace {
        writeln!(out, "{},{},{},{},{}", s.epoch, s.train_loss, s.val_loss, s.train_mse, s.val_mse)?;
    }
    Ok(())
}

/// A trained network together with the scalers fitted on its training set.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedGru {
    pub model: GruRegressor,
    pub x_scaler: ScalerParams,
    pub y_scaler: ScalerParams,
}

/// Feature and target scalers fitted on every step of every training point.
pub fn fit_scalers(train: &[&TrainingPoint]) -> Result<(ScalerParams, ScalerParams)> {
    if train.is_empty() {
        return Err(PipelineError::Invalid("empty training set".into()));
    }
    let rows: usize = train.iter().map(|p| p.features.rows).sum();
    let mut x = Matrix::zeros(rows, N_FEATURES);
    let mut y = Matrix::zeros(rows, N_OUTPUTS);
    let mut r = 0;
    for p in train {
        let n = p.features.rows;
        x.data[r * N_FEATURES..(r + n) * N_FEATURES].copy_from_slice(&p.features.data);
        y.data[r * N_OUTPUTS..(r + n) * N_OUTPUTS].copy_from_slice(&p.targets.data);
        r += n;
    }
    Ok((ScalerParams::fit(&x)?, ScalerParams::fit(&y)?))
}

/// Time-major batch of `m(p)` for each point, scaled per column.
fn scaled_batch(points: &[&TrainingPoint], pick: impl Fn(&TrainingPoint) -> &Matrix, scaler: &ScalerParams) -> Matrix {
    let b = points.len();
    let first = pick(points[0]);
    let (steps, cols) = (first.rows, first.cols);
    let mut out = Matrix::zeros(steps * b, cols);
    for (j, p) in points.iter().enumerate() {
        let m = pick(p);
        for t in 0..steps {
            let dst = out.row_mut(t * b + j);
            for (((d, &v), mu), sd) in dst.iter_mut().zip(m.row(t)).zip(&scaler.mean).zip(&scaler.std) {
                *d = (v - mu) / sd;
            }
        }
    }
    out
}

const EVAL_BATCH: usize = 256;

fn check_shapes(points: &[&TrainingPoint]) -> Result<()> {
    let Some(first) = points.first() else {
        return Ok(());
    };
    let steps = first.features.rows;
    for p in points {
        if p.features.rows != steps || p.features.cols != N_FEATURES || p.targets.cols != N_OUTPUTS || p.targets.rows != steps {
            return Err(PipelineError::Length(format!(
                "point {} has shape {}x{} / {}x{}",
                p.meta.design, p.features.rows, p.features.cols, p.targets.rows, p.targets.cols
            )));
        }
    }
    Ok(())
}

impl TrainedGru {
    pub fn new(model: GruRegressor, x_scaler: ScalerParams, y_scaler: ScalerParams) -> Self {
        TrainedGru { model, x_scaler, y_scaler }
    }

    /// Physical-unit predictions, one `steps × 4` matrix per point.
    pub fn predict(&self, points: &[&TrainingPoint]) -> Result<Vec<Matrix>> {
        check_shapes(points)?;
        let mut out = Vec::with_capacity(points.len());
        for chunk in points.chunks(EVAL_BATCH) {
            let x = scaled_batch(chunk, |p| &p.features, &self.x_scaler);
            let y = self.model.predict(&x, chunk.len())?;
            for m in crate::features::split_time_major(&y, chunk.len()) {
                out.push(self.y_scaler.invert(&m)?);
            }
        }
        Ok(out)
    }

    /// Prediction for a bare feature matrix.
    pub fn predict_features(&self, features: &Matrix) -> Result<Matrix> {
        if features.cols != N_FEATURES {
            return Err(PipelineError::Length(format!("{} feature columns, expected {N_FEATURES}", features.cols)));
        }
        let x = self.x_scaler.apply(features)?;
        Ok(self.y_scaler.invert(&self.model.predict(&x, 1)?)?)
    }

    /// Scaled-target (MAE, MSE) over `points`.
    pub fn scaled_losses(&self, points: &[&TrainingPoint]) -> Result<(f64, f64)> {
        if points.is_empty() {
            return Ok((f64::NAN, f64::NAN));
        }
        check_shapes(points)?;
        let (mut sa, mut ss, mut n) = (0.0, 0.0, 0usize);
        for chunk in points.chunks(EVAL_BATCH) {
            let x = scaled_batch(chunk, |p| &p.features, &self.x_scaler);
            let y = scaled_batch(chunk, |p| &p.targets, &self.y_scaler);
            let pred = self.model.predict(&x, chunk.len())?;
            for (p, t) in pred.data.iter().zip(&y.data) {
                sa += (p - t).abs();
                ss += (p - t) * (p - t);
            }
            n += y.data.len();
        }
        Ok((sa / n as f64, ss / n as f64))
    }

    pub fn to_weight_file(&self) -> WeightFile {
        let mut wf = WeightFile::new(self.model.spec(), &self.model)
            .with_scaler("features", self.x_scaler.clone())
            .with_scaler("targets", self.y_scaler.clone());
        wf.meta.insert("feature_layout".into(), FEATURE_LAYOUT_VERSION.to_string());
        wf
    }

    pub fn from_weight_file(wf: &WeightFile) -> Result<Self> {
        let layout = wf.meta.get("feature_layout").and_then(|v| v.parse::<u32>().ok());
        if layout != Some(FEATURE_LAYOUT_VERSION) {
            return Err(PipelineError::LayoutVersion {
                found: layout.unwrap_or(0),
                expected: FEATURE_LAYOUT_VERSION,
            });
        }
        let model = GruRegressor::from_blocks(&wf.spec, &wf.blocks)?;
        let get = |name: &str| {
            wf.scaler(name)
                .cloned()
                .ok_or_else(|| PipelineError::Format(format!("weight file lacks the {name} scaler")))
        };
        let (x, y) = (get("features")?, get("targets")?);
        if x.channels() != N_FEATURES || y.channels() != N_OUTPUTS {
            return Err(PipelineError::Format("scaler channel counts do not match the layout".into()));
        }
        Ok(TrainedGru::new(model, x, y))
    }
}

/// Fits scalers on `train`, initializes a network and trains it.
pub fn train_gru(train: &[&TrainingPoint], val: &[&TrainingPoint], cfg: &GruConfig) -> Result<(TrainedGru, Vec<EpochStats>)> {
    let (xs, ys) = fit_scalers(train)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let model = GruRegressor::new(N_FEATURES, &cfg.hidden, N_OUTPUTS, &mut rng);
    let mut trained = TrainedGru::new(model, xs, ys);
    let trace = continue_training(&mut trained, train, val, cfg)?;
    Ok((trained, trace))
}

/// Further Adam training with the scalers held fixed (fresh optimizer state).
pub fn continue_training(
    trained: &mut TrainedGru,
    train: &[&TrainingPoint],
    val: &[&TrainingPoint],
    cfg: &GruConfig,
) -> Result<Vec<EpochStats>> {
    if train.is_empty() {
        return Err(PipelineError::Invalid("empty training set".into()));
    }
    if cfg.batch_size == 0 {
        return Err(PipelineError::Invalid("batch size must be positive".into()));
    }
    check_shapes(train)?;
    check_shapes(val)?;
    let steps = train.len().div_ceil(cfg.batch_size);
    let mut adam = AdamState::new(&trained.model, cfg.lr0, cfg.decay, steps as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e37));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut sl, mut sm, mut n) = (0.0, 0.0, 0usize);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let pts: Vec<&TrainingPoint> = chunk.iter().map(|&i| train[i]).collect();
            let x = scaled_batch(&pts, |p| &p.features, &trained.x_scaler);
            let y = scaled_batch(&pts, |p| &p.targets, &trained.y_scaler);
            let (pred, cache) = trained.model.forward(&x, pts.len())?;
            let (loss, dy) = cfg.loss.eval(&pred, &y)?;
            if !loss.is_finite() {
                return Err(PipelineError::Diverged {
                    epoch,
                    batch: b,
                    what: format!("loss {loss}"),
                });
            }
            let mse = LossKind::Mse.value(&pred, &y)?;
            let grads = trained.model.backward(&cache, &dy)?;
            adam.step(&mut trained.model, &grads).map_err(|e| PipelineError::Diverged {
                epoch,
                batch: b,
                what: e.to_string(),
            })?;
            let w = y.data.len();
            let per_entry = match cfg.loss {
                LossKind::Mae => loss,
                LossKind::Mse => LossKind::Mae.value(&pred, &y)?,
            };
            sl += per_entry * w as f64;
            sm += mse * w as f64;
            n += w;
        }
        let (val_loss, val_mse) = trained.scaled_losses(val)?;
        let stats = EpochStats {
            epoch,
            train_loss: sl / n as f64,
            val_loss,
            train_mse: sm / n as f64,
            val_mse,
        };
        log::info!(
            "epoch {epoch}: train mae {:.5} mse {:.5} | val mae {:.5} mse {:.5}",
            stats.train_loss,
            stats.train_mse,
            stats.val_loss,
            stats.val_mse
        );
        trace.push(stats);
    }
    Ok(trace)
}
