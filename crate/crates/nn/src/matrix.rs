//! Row-major dense matrix and a GEMM entry point.

use rand::Rng;

use crate::{NnError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(NnError::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Uniform entries in `[-limit, limit]`.
    pub fn uniform<R: Rng + ?Sized>(rows: usize, cols: usize, limit: f64, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| rng.gen_range(-limit..=limit)).collect();
        Matrix { rows, cols, data }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Rows `start..start + count` as a new matrix.
    pub fn rows_slice(&self, start: usize, count: usize) -> Matrix {
        Matrix {
            rows: count,
            cols: self.cols,
            data: self.data[start * self.cols..(start + count) * self.cols].to_vec(),
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Column sums.
    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (acc, v) in s.iter_mut().zip(self.row(r)) {
                *acc += v;
            }
        }
        s
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(NnError::Shape(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        gemm(
            self.rows, self.cols, other.cols, 1.0,
            View::normal(&self.data, self.cols),
            View::normal(&other.data, other.cols),
            0.0, &mut out.data, other.cols,
        );
        Ok(out)
    }
}

/// A row-major operand, optionally read transposed.
#[derive(Clone, Copy)]
pub struct View<'a> {
    pub data: &'a [f64],
    /// Row stride of the stored (untransposed) matrix.
    pub ld: usize,
    pub transposed: bool,
}

impl<'a> View<'a> {
    pub fn normal(data: &'a [f64], ld: usize) -> Self {
        View { data, ld, transposed: false }
    }

    pub fn transposed(data: &'a [f64], ld: usize) -> Self {
        View { data, ld, transposed: true }
    }

    fn strides(&self) -> (isize, isize) {
        if self.transposed {
            (1, self.ld as isize)
        } else {
            (self.ld as isize, 1)
        }
    }
}

/// `C = alpha · op(A) · op(B) + beta · C` with `op(A)` m×k, `op(B)` k×n and
/// `C` row-major m×n with row stride `ldc`.
#[allow(clippy::too_many_arguments)]
pub fn gemm(m: usize, k: usize, n: usize, alpha: f64, a: View, b: View, beta: f64, c: &mut [f64], ldc: usize) {
    if m == 0 || n == 0 {
        return;
    }
    let need_a = if a.transposed { (k.max(1) - 1) * a.ld + m } else { (m.max(1) - 1) * a.ld + k };
    let need_b = if b.transposed { (n.max(1) - 1) * b.ld + k } else { (k.max(1) - 1) * b.ld + n };
    assert!(k == 0 || (a.data.len() >= need_a && b.data.len() >= need_b), "gemm operand too small");
    assert!(c.len() >= (m - 1) * ldc + n, "gemm output too small");
    let (rsa, csa) = a.strides();
    let (rsb, csb) = b.strides();
    // SAFETY: bounds of every operand were checked above for the given
    // dimensions and strides.
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, alpha,
            a.data.as_ptr(), rsa, csa,
            b.data.as_ptr(), rsb, csb,
            beta,
            c.as_mut_ptr(), ldc as isize, 1,
        );
    }
}
