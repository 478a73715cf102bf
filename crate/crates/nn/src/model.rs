//! The two networks used by the surrogate: a stacked GRU with a shared
//! per-step dense head, and a dense autoencoder for skeleton images.

use rand::Rng;

use crate::dense::{Activation, DenseCache, DenseLayer};
use crate::gru::{GruCache, GruLayer};
use crate::loss::LossKind;
use crate::matrix::Matrix;
use crate::{NnError, Params, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Gru { input: usize, hidden: usize },
    Dense { input: usize, output: usize, activation: Activation },
}

impl LayerSpec {
    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Gru { input, hidden } => GruLayer::param_count_for(input, hidden),
            LayerSpec::Dense { input, output, .. } => DenseLayer::param_count_for(input, output),
        }
    }

    /// Lengths of the parameter blocks in storage order.
    pub fn block_lengths(&self) -> Vec<usize> {
        match *self {
            LayerSpec::Gru { input, hidden } => {
                let mut v = vec![hidden * input; 3];
                v.extend([hidden * hidden; 3]);
                v.extend([hidden; 6]);
                v
            }
            LayerSpec::Dense { input, output, .. } => vec![output * input, output],
        }
    }

    fn input(&self) -> usize {
        match *self {
            LayerSpec::Gru { input, .. } | LayerSpec::Dense { input, .. } => input,
        }
    }

    fn output(&self) -> usize {
        match *self {
            LayerSpec::Gru { hidden, .. } => hidden,
            LayerSpec::Dense { output, .. } => output,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// GRU layers followed by one dense head applied at every step.
    GruRegressor,
    /// Dense layers; the first `encoder_layers` produce the latent code.
    Autoencoder { encoder_layers: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub layers: Vec<LayerSpec>,
}

impl ModelSpec {
    pub fn gru_regressor(input: usize, hidden: &[usize], outputs: usize) -> Self {
        let mut layers = Vec::new();
        let mut prev = input;
        for &h in hidden {
            layers.push(LayerSpec::Gru { input: prev, hidden: h });
            prev = h;
        }
        layers.push(LayerSpec::Dense {
            input: prev,
            output: outputs,
            activation: Activation::Identity,
        });
        ModelSpec {
            kind: ModelKind::GruRegressor,
            layers,
        }
    }

    /// `pixels → hidden (ReLU) → latent (ReLU) → pixels (sigmoid)`.
    pub fn autoencoder(pixels: usize, hidden: usize, latent: usize) -> Self {
        ModelSpec {
            kind: ModelKind::Autoencoder { encoder_layers: 2 },
            layers: vec![
                LayerSpec::Dense { input: pixels, output: hidden, activation: Activation::Relu },
                LayerSpec::Dense { input: hidden, output: latent, activation: Activation::Relu },
                LayerSpec::Dense { input: latent, output: pixels, activation: Activation::Sigmoid },
            ],
        }
    }

    pub fn count_params(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }

    /// Total without the regression head; equal to [`count_params`](Self::count_params)
    /// for autoencoders.
    pub fn count_params_without_head(&self) -> usize {
        match self.kind {
            ModelKind::GruRegressor => self
                .layers
                .iter()
                .filter(|l| matches!(l, LayerSpec::Gru { .. }))
                .map(LayerSpec::param_count)
                .sum(),
            ModelKind::Autoencoder { .. } => self.count_params(),
        }
    }

    pub fn block_lengths(&self) -> Vec<usize> {
        self.layers.iter().flat_map(LayerSpec::block_lengths).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(NnError::Shape("model without layers".into()));
        }
        for pair in self.layers.windows(2) {
            if pair[0].output() != pair[1].input() {
                return Err(NnError::Shape(format!(
                    "layer output {} feeds input {}",
                    pair[0].output(),
                    pair[1].input()
                )));
            }
        }
        match self.kind {
            ModelKind::GruRegressor => {
                let n = self.layers.len();
                let grus_first = self.layers[..n - 1].iter().all(|l| matches!(l, LayerSpec::Gru { .. }));
                if n < 2 || !grus_first || !matches!(self.layers[n - 1], LayerSpec::Dense { .. }) {
                    return Err(NnError::Shape("GRU regressor needs GRU layers then one dense head".into()));
                }
            }
            ModelKind::Autoencoder { encoder_layers } => {
                if self.layers.iter().any(|l| matches!(l, LayerSpec::Gru { .. }))
                    || encoder_layers == 0
                    || encoder_layers >= self.layers.len()
                {
                    return Err(NnError::Shape("autoencoder needs dense encoder and decoder layers".into()));
                }
            }
        }
        Ok(())
    }
}

fn fill_blocks<P: Params + ?Sized>(target: &mut P, blocks: &mut std::slice::Iter<'_, Vec<f64>>) -> Result<()> {
    for dst in target.param_blocks_mut() {
        let src = blocks.next().ok_or_else(|| NnError::Shape("too few parameter blocks".into()))?;
        if src.len() != dst.len() {
            return Err(NnError::Shape(format!("block of {} values, expected {}", src.len(), dst.len())));
        }
        dst.copy_from_slice(src);
    }
    Ok(())
}

/// Stacked GRU followed by a dense head shared across time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct GruRegressor {
    pub layers: Vec<GruLayer>,
    pub head: DenseLayer,
}

/// Forward-pass caches for [`GruRegressor::backward`].
#[derive(Debug, Clone)]
pub struct GruRegressorCache {
    pub layers: Vec<GruCache>,
    pub head: DenseCache,
}

impl GruRegressor {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: &[usize], outputs: usize, rng: &mut R) -> Self {
        let mut layers = Vec::new();
        let mut prev = input;
        for &h in hidden {
            layers.push(GruLayer::new(prev, h, rng));
            prev = h;
        }
        GruRegressor {
            layers,
            head: DenseLayer::new(prev, outputs, Activation::Identity, rng),
        }
    }

    pub fn spec(&self) -> ModelSpec {
        let hidden: Vec<usize> = self.layers.iter().map(GruLayer::hidden_dim).collect();
        let input = self.layers.first().map_or(self.head.inputs(), GruLayer::input_dim);
        ModelSpec::gru_regressor(input, &hidden, self.head.outputs())
    }

    pub fn from_blocks(spec: &ModelSpec, blocks: &[Vec<f64>]) -> Result<Self> {
        spec.validate()?;
        if spec.kind != ModelKind::GruRegressor {
            return Err(NnError::Shape("spec is not a GRU regressor".into()));
        }
        let mut layers = Vec::new();
        let mut head = None;
        for l in &spec.layers {
            match *l {
                LayerSpec::Gru { input, hidden } => layers.push(GruLayer::zeros(input, hidden)),
                LayerSpec::Dense { input, output, activation } => {
                    head = Some(DenseLayer {
                        w: Matrix::zeros(output, input),
                        b: vec![0.0; output],
                        activation,
                    })
                }
            }
        }
        let mut model = GruRegressor {
            layers,
            head: head.expect("validated spec has a head"),
        };
        let mut it = blocks.iter();
        fill_blocks(&mut model, &mut it)?;
        if it.next().is_some() {
            return Err(NnError::Shape("too many parameter blocks".into()));
        }
        Ok(model)
    }

    /// `x` is time-major `(T·B) × input`; output is `(T·B) × outputs`.
    pub fn forward(&self, x: &Matrix, batch: usize) -> Result<(Matrix, GruRegressorCache)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for layer in &self.layers {
            let (out, cache) = layer.forward(&h, batch)?;
            caches.push(cache);
            h = out;
        }
        let (y, head) = self.head.forward(&h)?;
        Ok((y, GruRegressorCache { layers: caches, head }))
    }

    pub fn predict(&self, x: &Matrix, batch: usize) -> Result<Matrix> {
        Ok(self.forward(x, batch)?.0)
    }

    /// Gradients in [`Params`] block order, given `dL/dy`.
    pub fn backward(&self, cache: &GruRegressorCache, dy: &Matrix) -> Result<Vec<Vec<f64>>> {
        let (hg, mut d) = self.head.backward(&cache.head, dy)?;
        let mut per_layer = Vec::with_capacity(self.layers.len());
        for (layer, c) in self.layers.iter().zip(&cache.layers).rev() {
            let (g, dx) = layer.backward(c, &d)?;
            per_layer.push(g);
            d = dx;
        }
        per_layer.reverse();
        let mut out: Vec<Vec<f64>> = Vec::new();
        for g in &per_layer {
            out.extend(g.blocks().into_iter().map(<[f64]>::to_vec));
        }
        out.extend(hg.blocks().into_iter().map(<[f64]>::to_vec));
        Ok(out)
    }

    pub fn loss_and_grads(&self, x: &Matrix, y: &Matrix, batch: usize, loss: LossKind) -> Result<(f64, Vec<Vec<f64>>)> {
        let (pred, cache) = self.forward(x, batch)?;
        let (value, dy) = loss.eval(&pred, y)?;
        Ok((value, self.backward(&cache, &dy)?))
    }
}

impl Params for GruRegressor {
    fn param_blocks(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = self.layers.iter().flat_map(|l| l.param_blocks()).collect();
        v.extend(self.head.param_blocks());
        v
    }

    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = self.layers.iter_mut().flat_map(|l| l.param_blocks_mut()).collect();
        v.extend(self.head.param_blocks_mut());
        v
    }
}

/// Dense autoencoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    pub layers: Vec<DenseLayer>,
    pub encoder_layers: usize,
}

impl Autoencoder {
    pub fn new<R: Rng + ?Sized>(pixels: usize, hidden: usize, latent: usize, rng: &mut R) -> Self {
        Autoencoder {
            layers: vec![
                DenseLayer::new(pixels, hidden, Activation::Relu, rng),
                DenseLayer::new(hidden, latent, Activation::Relu, rng),
                DenseLayer::new(latent, pixels, Activation::Sigmoid, rng),
            ],
            encoder_layers: 2,
        }
    }

    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            kind: ModelKind::Autoencoder {
                encoder_layers: self.encoder_layers,
            },
            layers: self
                .layers
                .iter()
                .map(|l| LayerSpec::Dense {
                    input: l.inputs(),
                    output: l.outputs(),
                    activation: l.activation,
                })
                .collect(),
        }
    }

    pub fn from_blocks(spec: &ModelSpec, blocks: &[Vec<f64>]) -> Result<Self> {
        spec.validate()?;
        let ModelKind::Autoencoder { encoder_layers } = spec.kind else {
            return Err(NnError::Shape("spec is not an autoencoder".into()));
        };
        let layers = spec
            .layers
            .iter()
            .map(|l| match *l {
                LayerSpec::Dense { input, output, activation } => DenseLayer {
                    w: Matrix::zeros(output, input),
                    b: vec![0.0; output],
                    activation,
                },
                LayerSpec::Gru { .. } => unreachable!("validated"),
            })
            .collect();
        let mut model = Autoencoder { layers, encoder_layers };
        let mut it = blocks.iter();
        fill_blocks(&mut model, &mut it)?;
        if it.next().is_some() {
            return Err(NnError::Shape("too many parameter blocks".into()));
        }
        Ok(model)
    }

    pub fn latent_dim(&self) -> usize {
        self.layers[self.encoder_layers - 1].outputs()
    }

    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        let mut h = x.clone();
        for l in &self.layers[..self.encoder_layers] {
            h = l.predict(&h)?;
        }
        Ok(h)
    }

    pub fn decode(&self, z: &Matrix) -> Result<Matrix> {
        let mut h = z.clone();
        for l in &self.layers[self.encoder_layers..] {
            h = l.predict(&h)?;
        }
        Ok(h)
    }

    pub fn reconstruct(&self, x: &Matrix) -> Result<Matrix> {
        self.decode(&self.encode(x)?)
    }

    /// Reconstruction loss against the input itself, with gradients.
    pub fn loss_and_grads(&self, x: &Matrix, loss: LossKind) -> Result<(f64, Vec<Vec<f64>>)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for l in &self.layers {
            let (out, c) = l.forward(&h)?;
            caches.push(c);
            h = out;
        }
        let (value, mut d) = loss.eval(&h, x)?;
        let mut grads: Vec<Vec<Vec<f64>>> = Vec::with_capacity(self.layers.len());
        for (l, c) in self.layers.iter().zip(&caches).rev() {
            let (g, dx) = l.backward(c, &d)?;
            grads.push(g.blocks().into_iter().map(<[f64]>::to_vec).collect());
            d = dx;
        }
        grads.reverse();
        Ok((value, grads.into_iter().flatten().collect()))
    }
}

impl Params for Autoencoder {
    fn param_blocks(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.param_blocks()).collect()
    }

    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.param_blocks_mut()).collect()
    }
}
