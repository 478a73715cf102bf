//! Neural-network kernels used by the lattice surrogate.
//!
//! Everything is 64-bit and written out by hand: forward passes cache what
//! their backward passes need, and every backward pass is checked against
//! central finite differences in the tests.

pub mod adam;
pub mod dense;
pub mod gru;
pub mod loss;
pub mod matrix;
pub mod model;
pub mod scaler;
pub mod weights;

pub use adam::AdamState;
pub use dense::{Activation, DenseLayer};
pub use gru::GruLayer;
pub use matrix::Matrix;
pub use loss::LossKind;
pub use model::{Autoencoder, GruRegressor, LayerSpec, ModelKind, ModelSpec};
pub use scaler::ScalerParams;
pub use weights::WeightFile;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite gradient in parameter block {block}")]
    NonFiniteGradient { block: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("weight file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;

/// Something with trainable parameters, exposed as flat blocks in a fixed order.
pub trait Params {
    fn param_blocks(&self) -> Vec<&[f64]>;
    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]>;

    fn param_count(&self) -> usize {
        self.param_blocks().iter().map(|b| b.len()).sum()
    }
}
