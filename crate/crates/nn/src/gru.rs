//! Gated recurrent unit, reset-after variant with separate input-side and
//! recurrent-side biases:
//!
//! ```text
//! z  = σ(W_z x + b_xz + U_z h + b_hz)
//! r  = σ(W_r x + b_xr + U_r h + b_hr)
//! h̃  = tanh(W_h x + b_xh + r ⊙ (U_h h + b_hh))
//! h' = z ⊙ h + (1 − z) ⊙ h̃
//! ```
//!
//! Sequences are stored time-major: row `t·B + b` of a `(T·B) × dim` matrix
//! is sample `b` at step `t`.

use rand::Rng;

use crate::dense::sigmoid;
use crate::matrix::{gemm, Matrix, View};
use crate::{NnError, Params, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GruLayer {
    /// `3n × m`, row blocks `[W_z; W_r; W_h]`.
    pub w: Matrix,
    /// `3n × n`, row blocks `[U_z; U_r; U_h]`.
    pub u: Matrix,
    /// `[b_xz, b_xr, b_xh]`.
    pub bx: Vec<f64>,
    /// `[b_hz, b_hr, b_hh]`.
    pub bh: Vec<f64>,
}

/// Forward-pass state needed by [`GruLayer::backward`].
#[derive(Debug, Clone)]
pub struct GruCache {
    pub batch: usize,
    pub steps: usize,
    pub input: Matrix,
    /// `((T+1)·B) × n`; the first `B` rows are the initial state.
    pub hidden: Matrix,
    pub z: Matrix,
    pub r: Matrix,
    pub cand: Matrix,
    /// `U_h h + b_hh` per step.
    pub hp_h: Matrix,
}

/// Gradients in the same layout as the layer.
#[derive(Debug, Clone, PartialEq)]
pub struct GruGrads {
    pub w: Matrix,
    pub u: Matrix,
    pub bx: Vec<f64>,
    pub bh: Vec<f64>,
}

impl GruLayer {
    /// Glorot-uniform input weights, uniform recurrent weights scaled by
    /// `1/√n`, zero biases.
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let n = hidden_dim;
        let limit_w = (6.0 / (input_dim + n) as f64).sqrt();
        let limit_u = 1.0 / (n as f64).sqrt();
        GruLayer {
            w: Matrix::uniform(3 * n, input_dim, limit_w, rng),
            u: Matrix::uniform(3 * n, n, limit_u, rng),
            bx: vec![0.0; 3 * n],
            bh: vec![0.0; 3 * n],
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let n = hidden_dim;
        GruLayer {
            w: Matrix::zeros(3 * n, input_dim),
            u: Matrix::zeros(3 * n, n),
            bx: vec![0.0; 3 * n],
            bh: vec![0.0; 3 * n],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols
    }

    pub fn hidden_dim(&self) -> usize {
        self.u.cols
    }

    pub fn param_count_for(input_dim: usize, hidden_dim: usize) -> usize {
        3 * hidden_dim * (input_dim + hidden_dim) + 6 * hidden_dim
    }

    /// One step for a single sample.
    pub fn step(&self, x: &[f64], h_prev: &[f64]) -> Result<Vec<f64>> {
        let x = Matrix::from_vec(1, x.len(), x.to_vec())?;
        let h0 = Matrix::from_vec(1, h_prev.len(), h_prev.to_vec())?;
        let (h, _) = self.forward_from(&x, 1, &h0)?;
        Ok(h.data)
    }

    /// Runs the sequence from a zero initial state and returns every hidden
    /// state, `(T·B) × n`.
    pub fn forward(&self, x: &Matrix, batch: usize) -> Result<(Matrix, GruCache)> {
        let h0 = Matrix::zeros(batch, self.hidden_dim());
        self.forward_from(x, batch, &h0)
    }

    pub fn forward_from(&self, x: &Matrix, batch: usize, h0: &Matrix) -> Result<(Matrix, GruCache)> {
        let (m, n) = (self.input_dim(), self.hidden_dim());
        if x.cols != m {
            return Err(NnError::Shape(format!("GRU expects {m} inputs, got {}", x.cols)));
        }
        if batch == 0 || x.rows % batch != 0 {
            return Err(NnError::Shape(format!("{} rows do not split into batches of {batch}", x.rows)));
        }
        if h0.rows != batch || h0.cols != n {
            return Err(NnError::Shape("initial state has the wrong shape".into()));
        }
        let steps = x.rows / batch;
        let n3 = 3 * n;

        // Input projections for every step at once.
        let mut xp = Matrix::zeros(x.rows, n3);
        for r in 0..x.rows {
            xp.row_mut(r).copy_from_slice(&self.bx);
        }
        gemm(
            x.rows, m, n3, 1.0,
            View::normal(&x.data, m),
            View::transposed(&self.w.data, m),
            1.0, &mut xp.data, n3,
        );

        let mut hidden = Matrix::zeros((steps + 1) * batch, n);
        hidden.data[..batch * n].copy_from_slice(&h0.data);
        let mut z = Matrix::zeros(steps * batch, n);
        let mut r = Matrix::zeros(steps * batch, n);
        let mut cand = Matrix::zeros(steps * batch, n);
        let mut hp_h = Matrix::zeros(steps * batch, n);
        let mut hp = Matrix::zeros(batch, n3);

        for t in 0..steps {
            for b in 0..batch {
                hp.row_mut(b).copy_from_slice(&self.bh);
            }
            gemm(
                batch, n, n3, 1.0,
                View::normal(&hidden.data[t * batch * n..(t + 1) * batch * n], n),
                View::transposed(&self.u.data, n),
                1.0, &mut hp.data, n3,
            );
            for b in 0..batch {
                let row = t * batch + b;
                let xr = xp.row(row);
                let hr = hp.row(b);
                let prev_off = row * n;
                let next_off = (row + batch) * n;
                for j in 0..n {
                    let zj = sigmoid(xr[j] + hr[j]);
                    let rj = sigmoid(xr[n + j] + hr[n + j]);
                    let hh = hr[2 * n + j];
                    let cj = (xr[2 * n + j] + rj * hh).tanh();
                    let hprev = hidden.data[prev_off + j];
                    hidden.data[next_off + j] = zj * hprev + (1.0 - zj) * cj;
                    z.data[row * n + j] = zj;
                    r.data[row * n + j] = rj;
                    cand.data[row * n + j] = cj;
                    hp_h.data[row * n + j] = hh;
                }
            }
        }

        let out = Matrix {
            rows: steps * batch,
            cols: n,
            data: hidden.data[batch * n..].to_vec(),
        };
        Ok((
            out,
            GruCache {
                batch,
                steps,
                input: x.clone(),
                hidden,
                z,
                r,
                cand,
                hp_h,
            },
        ))
    }

    /// Backpropagation through time. `dh` is the loss gradient with respect
    /// to every emitted hidden state. Returns parameter gradients and the
    /// gradient with respect to the input sequence.
    pub fn backward(&self, cache: &GruCache, dh: &Matrix) -> Result<(GruGrads, Matrix)> {
        let (m, n) = (self.input_dim(), self.hidden_dim());
        let (batch, steps) = (cache.batch, cache.steps);
        if dh.rows != steps * batch || dh.cols != n {
            return Err(NnError::Shape("upstream gradient does not match cached sequence".into()));
        }
        let n3 = 3 * n;
        let rows = steps * batch;
        let mut dxp = Matrix::zeros(rows, n3);
        let mut dhp = Matrix::zeros(rows, n3);
        let mut carry = Matrix::zeros(batch, n);

        for t in (0..steps).rev() {
            for b in 0..batch {
                let row = t * batch + b;
                for j in 0..n {
                    let i = row * n + j;
                    let g = dh.data[i] + carry.data[b * n + j];
                    let zj = cache.z.data[i];
                    let rj = cache.r.data[i];
                    let cj = cache.cand.data[i];
                    let hprev = cache.hidden.data[i];
                    let da_z = g * (hprev - cj) * zj * (1.0 - zj);
                    let da_h = g * (1.0 - zj) * (1.0 - cj * cj);
                    let da_r = da_h * cache.hp_h.data[i] * rj * (1.0 - rj);
                    let o = row * n3;
                    dxp.data[o + j] = da_z;
                    dxp.data[o + n + j] = da_r;
                    dxp.data[o + 2 * n + j] = da_h;
                    dhp.data[o + j] = da_z;
                    dhp.data[o + n + j] = da_r;
                    dhp.data[o + 2 * n + j] = da_h * rj;
                    carry.data[b * n + j] = g * zj;
                }
            }
            gemm(
                batch, n3, n, 1.0,
                View::normal(&dhp.data[t * batch * n3..(t + 1) * batch * n3], n3),
                View::normal(&self.u.data, n),
                1.0, &mut carry.data, n,
            );
        }

        let mut dw = Matrix::zeros(n3, m);
        gemm(
            n3, rows, m, 1.0,
            View::transposed(&dxp.data, n3),
            View::normal(&cache.input.data, m),
            0.0, &mut dw.data, m,
        );
        let mut du = Matrix::zeros(n3, n);
        gemm(
            n3, rows, n, 1.0,
            View::transposed(&dhp.data, n3),
            View::normal(&cache.hidden.data[..rows * n], n),
            0.0, &mut du.data, n,
        );
        let mut dx = Matrix::zeros(rows, m);
        gemm(
            rows, n3, m, 1.0,
            View::normal(&dxp.data, n3),
            View::normal(&self.w.data, m),
            0.0, &mut dx.data, m,
        );
        Ok((
            GruGrads {
                w: dw,
                u: du,
                bx: dxp.col_sums(),
                bh: dhp.col_sums(),
            },
            dx,
        ))
    }
}

fn split3(s: &[f64]) -> [&[f64]; 3] {
    let k = s.len() / 3;
    [&s[..k], &s[k..2 * k], &s[2 * k..]]
}

fn split3_mut(s: &mut [f64]) -> [&mut [f64]; 3] {
    let k = s.len() / 3;
    let (a, rest) = s.split_at_mut(k);
    let (b, c) = rest.split_at_mut(k);
    [a, b, c]
}

/// Twelve blocks: `W_z, W_r, W_h, U_z, U_r, U_h, b_xz, b_xr, b_xh, b_hz, b_hr, b_hh`.
impl Params for GruLayer {
    fn param_blocks(&self) -> Vec<&[f64]> {
        let mut v = Vec::with_capacity(12);
        v.extend(split3(&self.w.data));
        v.extend(split3(&self.u.data));
        v.extend(split3(&self.bx));
        v.extend(split3(&self.bh));
        v
    }

    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = Vec::with_capacity(12);
        v.extend(split3_mut(&mut self.w.data));
        v.extend(split3_mut(&mut self.u.data));
        v.extend(split3_mut(&mut self.bx));
        v.extend(split3_mut(&mut self.bh));
        v
    }
}

impl GruGrads {
    /// Same twelve-block order as [`GruLayer::param_blocks`].
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut v = Vec::with_capacity(12);
        v.extend(split3(&self.w.data));
        v.extend(split3(&self.u.data));
        v.extend(split3(&self.bx));
        v.extend(split3(&self.bh));
        v
    }
}
