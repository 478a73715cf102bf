//! Geometry and physics side of the lattice surrogate pipeline.
//!
//! - [`keyspace`]: the 8-digit design keys, their enumeration and sampling.
//! - [`geometry`]: unit-cell skeleton construction, tessellation and features.
//! - [`raster`]: 128×128 skeleton images and the dice similarity coefficient.
//! - [`oracle`]: a deterministic 1D crush model standing in for explicit FE runs.

pub mod geometry;
pub mod keyspace;
pub mod oracle;
pub mod raster;

pub use geometry::{CurveSet, GeomFeatures};
pub use keyspace::DesignKey;
pub use oracle::{MaterialConfig, SimRecord};
pub use raster::BitImage;
