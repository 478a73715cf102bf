//! Per-channel standardization.

use crate::matrix::Matrix;
use crate::{NnError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScalerParams {
    pub mean: Vec<f64>,
    /// Population standard deviation; zero-variance channels get 1.
    pub std: Vec<f64>,
}

impl ScalerParams {
    /// Fits on the rows of `data` (one row per observation).
    pub fn fit(data: &Matrix) -> Result<Self> {
        if data.rows == 0 || data.cols == 0 {
            return Err(NnError::Empty("scaler fit"));
        }
        let n = data.rows as f64;
        let mean: Vec<f64> = data.col_sums().into_iter().map(|s| s / n).collect();
        let mut var = vec![0.0; data.cols];
        for r in 0..data.rows {
            for ((acc, v), m) in var.iter_mut().zip(data.row(r)).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(ScalerParams { mean, std })
    }

    pub fn identity(channels: usize) -> Self {
        ScalerParams {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    fn check(&self, data: &Matrix) -> Result<()> {
        if data.cols != self.channels() {
            return Err(NnError::Shape(format!(
                "scaler has {} channels, data has {}",
                self.channels(),
                data.cols
            )));
        }
        Ok(())
    }

    pub fn apply(&self, data: &Matrix) -> Result<Matrix> {
        self.check(data)?;
        let mut out = data.clone();
        for r in 0..out.rows {
            for ((v, m), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }

    pub fn invert(&self, data: &Matrix) -> Result<Matrix> {
        self.check(data)?;
        let mut out = data.clone();
        for r in 0..out.rows {
            for ((v, m), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * s + m;
            }
        }
        Ok(out)
    }
}
