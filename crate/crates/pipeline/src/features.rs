//! Per-step input features and targets for the GRU.

use lattice_core::oracle::{self, DesignId, MaterialConfig, SimRecord, STEPS};
use lattice_nn::Matrix;

use crate::{PipelineError, Result};

/// Bumped whenever the column layout below changes.
pub const FEATURE_LAYOUT_VERSION: u32 = 1;

pub const LATENT_DIM: usize = 100;
pub const N_FEATURES: usize = LATENT_DIM + 6;
pub const N_OUTPUTS: usize = 4;

pub const COL_THICKNESS: usize = LATENT_DIM;
pub const COL_FINAL_STRAIN: usize = LATENT_DIM + 1;
pub const COL_LOG_RATE: usize = LATENT_DIM + 2;
pub const COL_STRAIN: usize = LATENT_DIM + 3;
pub const COL_TIME: usize = LATENT_DIM + 4;
pub const COL_WAVE: usize = LATENT_DIM + 5;

pub const OUTPUT_NAMES: [&str; N_OUTPUTS] = ["rf", "pd", "dmd", "else"];

#[derive(Debug, Clone, PartialEq)]
pub struct PointMeta {
    pub design: DesignId,
    pub thickness: f64,
    pub strain_rate: f64,
    pub final_strain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPoint {
    /// `STEPS × N_FEATURES`.
    pub features: Matrix,
    /// `STEPS × N_OUTPUTS`, columns rf, pd, dmd, else.
    pub targets: Matrix,
    pub meta: PointMeta,
}

/// Elastic-wave indicator: 0 until the wave has crossed the lattice height.
pub fn wave_indicator(time: f64, height_mm: f64, mat: &MaterialConfig) -> f64 {
    if time > oracle::wave_arrival(height_mm, mat) {
        1.0
    } else {
        0.0
    }
}

/// Assembles the feature matrix for `record` given its design's latent code.
pub fn build_features(record: &SimRecord, latent: &[f64], mat: &MaterialConfig) -> Result<TrainingPoint> {
    if latent.len() != LATENT_DIM {
        return Err(PipelineError::Length(format!(
            "latent vector has {} entries, expected {LATENT_DIM}",
            latent.len()
        )));
    }
    let n = record.time.len();
    if n != STEPS
        || [&record.strain, &record.rf, &record.pd, &record.dmd, &record.else_]
            .iter()
            .any(|s| s.len() != n)
    {
        return Err(PipelineError::Length(format!(
            "record {} has series of unequal or wrong length (expected {STEPS})",
            record.design
        )));
    }
    let log_rate = record.strain_rate.log10();
    let mut features = Matrix::zeros(n, N_FEATURES);
    let mut targets = Matrix::zeros(n, N_OUTPUTS);
    for t in 0..n {
        let row = features.row_mut(t);
        row[..LATENT_DIM].copy_from_slice(latent);
        row[COL_THICKNESS] = record.thickness;
        row[COL_FINAL_STRAIN] = record.final_strain;
        row[COL_LOG_RATE] = log_rate;
        row[COL_STRAIN] = record.strain[t];
        row[COL_TIME] = record.time[t];
        row[COL_WAVE] = wave_indicator(record.time[t], record.height, mat);
        let out = targets.row_mut(t);
        out[0] = record.rf[t];
        out[1] = record.pd[t];
        out[2] = record.dmd[t];
        out[3] = record.else_[t];
    }
    Ok(TrainingPoint {
        features,
        targets,
        meta: PointMeta {
            design: record.design.clone(),
            thickness: record.thickness,
            strain_rate: record.strain_rate,
            final_strain: record.final_strain,
        },
    })
}

impl TrainingPoint {
    pub fn steps(&self) -> usize {
        self.features.rows
    }

    /// Checks the layout invariants of a feature matrix.
    pub fn check_layout(&self) -> Result<()> {
        let f = &self.features;
        if f.cols != N_FEATURES || self.targets.cols != N_OUTPUTS || self.targets.rows != f.rows || f.rows == 0 {
            return Err(PipelineError::Length("feature/target shape".into()));
        }
        for t in 1..f.rows {
            for c in [COL_THICKNESS, COL_FINAL_STRAIN, COL_LOG_RATE] {
                if f.get(t, c) != f.get(0, c) {
                    return Err(PipelineError::Invalid(format!("column {c} varies over time")));
                }
            }
            if f.get(t, COL_STRAIN) <= f.get(t - 1, COL_STRAIN) {
                return Err(PipelineError::Invalid("strain column not strictly increasing".into()));
            }
            if f.get(t, COL_WAVE) < f.get(t - 1, COL_WAVE) {
                return Err(PipelineError::Invalid("wave indicator decreases".into()));
            }
        }
        if (0..f.rows).any(|t| !matches!(f.get(t, COL_WAVE), v if v == 0.0 || v == 1.0)) {
            return Err(PipelineError::Invalid("wave indicator not binary".into()));
        }
        Ok(())
    }
}

/// Stacks points into a time-major `(T·B) × cols` batch as the GRU expects.
pub fn time_major(points: &[&Matrix]) -> Matrix {
    let b = points.len();
    let (steps, cols) = points.first().map_or((0, 0), |m| (m.rows, m.cols));
    let mut out = Matrix::zeros(steps * b, cols);
    for (j, m) in points.iter().enumerate() {
        for t in 0..steps {
            out.row_mut(t * b + j).copy_from_slice(m.row(t));
        }
    }
    out
}

/// Inverse of [`time_major`].
pub fn split_time_major(batch: &Matrix, b: usize) -> Vec<Matrix> {
    let steps = batch.rows / b;
    (0..b)
        .map(|j| {
            let mut m = Matrix::zeros(steps, batch.cols);
            for t in 0..steps {
                m.row_mut(t).copy_from_slice(batch.row(t * b + j));
            }
            m
        })
        .collect()
}
