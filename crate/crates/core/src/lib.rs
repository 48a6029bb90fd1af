//! Dyadic cubes, Whitney decompositions and Carleson tents on concrete ADR boundary
//! sets, with a dyadic extension of BMO boundary data and numerical audits of the
//! Carleson bounds it satisfies.

pub mod error;
pub mod audits;
pub mod bmo;
pub mod dyadic;
pub mod extension;
pub mod geometry;
pub mod harmonic;
pub mod regions;
pub mod scalar;
pub mod whitney;

pub use error::{Error, Result};
pub use geometry::{CubeId, Point};
pub use scalar::{Coefficient, Real};

/// Crate version, embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type BoundarySet64 = geometry::BoundarySet<f64>;
pub type Point64 = geometry::Point<f64>;
