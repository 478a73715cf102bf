//! Mean absolute and mean squared error over every entry of a batch.

use crate::matrix::Matrix;
use crate::{NnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Mae,
    Mse,
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Mae => "mae",
            LossKind::Mse => "mse",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "mae" => Some(LossKind::Mae),
            "mse" => Some(LossKind::Mse),
            _ => None,
        }
    }

    pub fn eval(&self, pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
        match self {
            LossKind::Mae => mae(pred, target),
            LossKind::Mse => mse(pred, target),
        }
    }

    pub fn value(&self, pred: &Matrix, target: &Matrix) -> Result<f64> {
        check(pred, target)?;
        let n = pred.data.len() as f64;
        let s: f64 = pred
            .data
            .iter()
            .zip(&target.data)
            .map(|(p, t)| match self {
                LossKind::Mae => (p - t).abs(),
                LossKind::Mse => (p - t) * (p - t),
            })
            .sum();
        Ok(s / n)
    }
}

fn check(pred: &Matrix, target: &Matrix) -> Result<()> {
    if pred.rows != target.rows || pred.cols != target.cols {
        return Err(NnError::Shape(format!(
            "prediction {}x{} vs target {}x{}",
            pred.rows, pred.cols, target.rows, target.cols
        )));
    }
    if pred.data.is_empty() {
        return Err(NnError::Empty("loss over an empty batch"));
    }
    Ok(())
}

/// Returns the loss and its gradient with respect to `pred`.
pub fn mae(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    check(pred, target)?;
    let n = pred.data.len() as f64;
    let mut grad = Matrix::zeros(pred.rows, pred.cols);
    let mut s = 0.0;
    for ((g, p), t) in grad.data.iter_mut().zip(&pred.data).zip(&target.data) {
        let d = p - t;
        s += d.abs();
        *g = if d > 0.0 {
            1.0 / n
        } else if d < 0.0 {
            -1.0 / n
        } else {
            0.0
        };
    }
    Ok((s / n, grad))
}

pub fn mse(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    check(pred, target)?;
    let n = pred.data.len() as f64;
    let mut grad = Matrix::zeros(pred.rows, pred.cols);
    let mut s = 0.0;
    for ((g, p), t) in grad.data.iter_mut().zip(&pred.data).zip(&target.data) {
        let d = p - t;
        s += d * d;
        *g = 2.0 * d / n;
    }
    Ok((s / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_inputs() {
        let a = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        for kind in [LossKind::Mae, LossKind::Mse] {
            let (l, g) = kind.eval(&a, &a).unwrap();
            assert_eq!(l, 0.0);
            assert!(g.data.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn constant_offset() {
        let t = Matrix::from_vec(1, 3, vec![1.0, -2.0, 5.0]).unwrap();
        let p = Matrix::from_vec(1, 3, t.data.iter().map(|v| v + 0.5).collect()).unwrap();
        assert!((mae(&p, &t).unwrap().0 - 0.5).abs() < 1e-15);
        assert!((mse(&p, &t).unwrap().0 - 0.25).abs() < 1e-15);
    }

    #[test]
    fn matches_scalar_loop_and_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = Matrix::uniform(3, 5, 2.0, &mut rng);
        let t = Matrix::uniform(3, 5, 2.0, &mut rng);
        let mut sa = 0.0;
        let mut ss = 0.0;
        for i in 0..15 {
            sa += (p.data[i] - t.data[i]).abs();
            ss += (p.data[i] - t.data[i]).powi(2);
        }
        assert!((mae(&p, &t).unwrap().0 - sa / 15.0).abs() < 1e-12);
        assert!((mse(&p, &t).unwrap().0 - ss / 15.0).abs() < 1e-12);
        for kind in [LossKind::Mae, LossKind::Mse] {
            let (_, g) = kind.eval(&p, &t).unwrap();
            let k = rng.gen_range(0..15);
            let h = 1e-5;
            let mut pp = p.clone();
            pp.data[k] += h;
            let mut pm = p.clone();
            pm.data[k] -= h;
            let num = (kind.value(&pp, &t).unwrap() - kind.value(&pm, &t).unwrap()) / (2.0 * h);
            assert!((num - g.data[k]).abs() / g.data[k].abs() < 1e-4);
        }
        assert!(mae(&p, &Matrix::zeros(5, 3)).is_err());
    }
}
