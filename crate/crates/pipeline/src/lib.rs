//! Turns oracle records into training data, trains the image autoencoder and
//! the GRU surrogate, evaluates them and runs the transfer protocol.

pub mod augment;
pub mod autoencoder;
pub mod dataset;
pub mod eval;
pub mod features;
pub mod fixtures;
pub mod generate;
pub mod split;
pub mod train;
pub mod transfer;

pub use augment::augment;
pub use dataset::Dataset;
pub use eval::{evaluate, EvalReport};
pub use features::{build_features, PointMeta, TrainingPoint};
pub use split::{split_dataset, Split, SplitSpec};
pub use train::{train_gru, GruConfig, TrainedGru};

use lattice_core::geometry::GeometryError;
use lattice_core::oracle::OracleError;
use lattice_core::raster::ImageError;
use lattice_nn::NnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("array length mismatch: {0}")]
    Length(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("dataset format: {0}")]
    Format(String),
    #[error("feature layout version {found}, expected {expected}")]
    LayoutVersion { found: u32, expected: u32 },
    #[error("training diverged at epoch {epoch}, batch {batch}: {what}")]
    Diverged { epoch: usize, batch: usize, what: String },
    #[error("no latent vector for design {0}")]
    MissingLatent(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PipelineError>;
