//! Numerical laboratory for pull-back bundles of Riemannian submersions.

pub mod cli_runner;
pub mod core_geometry;
pub mod error;
pub mod geometries;
pub mod graph_geometry;
pub mod linalg;
pub mod obstruction;
pub mod pullback;
pub mod submersion;

pub use error::{GeometryError, Result};
