//! Fully connected layer `y = act(x Wᵀ + b)`, applied row-wise to a batch.

use rand::Rng;

use crate::matrix::{gemm, Matrix, View};
use crate::{NnError, Params, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Identity,
}

impl Activation {
    pub fn name(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "relu" => Activation::Relu,
            "sigmoid" => Activation::Sigmoid,
            "tanh" => Activation::Tanh,
            "identity" => Activation::Identity,
            _ => return None,
        })
    }

    pub fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    fn derivative(&self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// out × in.
    pub w: Matrix,
    pub b: Vec<f64>,
    pub activation: Activation,
}

/// Values saved by [`DenseLayer::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct DenseCache {
    pub input: Matrix,
    pub pre: Matrix,
    pub output: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl DenseLayer {
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        DenseLayer {
            w: Matrix::uniform(outputs, inputs, limit, rng),
            b: vec![0.0; outputs],
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.w.cols
    }

    pub fn outputs(&self) -> usize {
        self.w.rows
    }

    pub fn param_count_for(inputs: usize, outputs: usize) -> usize {
        outputs * inputs + outputs
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, DenseCache)> {
        if x.cols != self.inputs() {
            return Err(NnError::Shape(format!(
                "dense layer expects {} inputs, got {}",
                self.inputs(),
                x.cols
            )));
        }
        let (n_in, n_out) = (self.inputs(), self.outputs());
        let mut pre = Matrix::zeros(x.rows, n_out);
        for r in 0..x.rows {
            pre.row_mut(r).copy_from_slice(&self.b);
        }
        gemm(
            x.rows, n_in, n_out, 1.0,
            View::normal(&x.data, n_in),
            View::transposed(&self.w.data, n_in),
            1.0, &mut pre.data, n_out,
        );
        let mut out = pre.clone();
        if self.activation != Activation::Identity {
            for v in out.data.iter_mut() {
                *v = self.activation.apply(*v);
            }
        }
        Ok((
            out.clone(),
            DenseCache {
                input: x.clone(),
                pre,
                output: out,
            },
        ))
    }

    /// Inference only; nothing is cached.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward(x)?.0)
    }

    /// Returns parameter gradients and the gradient with respect to the input.
    pub fn backward(&self, cache: &DenseCache, dy: &Matrix) -> Result<(DenseGrads, Matrix)> {
        if dy.rows != cache.output.rows || dy.cols != self.outputs() {
            return Err(NnError::Shape("upstream gradient does not match cached output".into()));
        }
        let (n_in, n_out) = (self.inputs(), self.outputs());
        let mut dz = dy.clone();
        if self.activation != Activation::Identity {
            for ((d, &z), &y) in dz.data.iter_mut().zip(&cache.pre.data).zip(&cache.output.data) {
                *d *= self.activation.derivative(z, y);
            }
        }
        let mut dw = Matrix::zeros(n_out, n_in);
        gemm(
            n_out, dz.rows, n_in, 1.0,
            View::transposed(&dz.data, n_out),
            View::normal(&cache.input.data, n_in),
            0.0, &mut dw.data, n_in,
        );
        let db = dz.col_sums();
        let mut dx = Matrix::zeros(dz.rows, n_in);
        gemm(
            dz.rows, n_out, n_in, 1.0,
            View::normal(&dz.data, n_out),
            View::normal(&self.w.data, n_in),
            0.0, &mut dx.data, n_in,
        );
        Ok((DenseGrads { w: dw, b: db }, dx))
    }
}

impl Params for DenseLayer {
    fn param_blocks(&self) -> Vec<&[f64]> {
        vec![&self.w.data, &self.b]
    }

    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.w.data, &mut self.b]
    }
}

impl DenseGrads {
    pub fn blocks(&self) -> Vec<&[f64]> {
        vec![&self.w.data, &self.b]
    }
}
