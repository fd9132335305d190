//! Cutoff extension of a tubular map to the whole trivialised bundle, with
//! the radius certification and block bounds used by the graph transform.

mod bounds;
mod bump;
mod extended;
mod grid;
mod map;
mod radius;

pub use bounds::{
    block_jacobian, c1_distance_to_linearization, verify_global_bounds, BlockJacobian, BoundReport, C1Distance,
    WorstSample,
};
pub use bump::{bump_phi, phi, tubular_bump};
pub use extended::{extend_map, ExtendedMap};
pub use grid::TubeGrid;
pub use map::{BundleMap, Linearization};
pub use radius::{find_safe_radius, RadiusProbe, SafeRadii};

use thiserror::Error;

use crate::manifold::ManifoldError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtensionError {
    #[error("bump argument {0} is negative")]
    NegativeArgument(f64),
    #[error("radius {0} is not positive")]
    NonpositiveRadius(f64),
    #[error("bump index must be 1 or 2, got {0}")]
    BadBumpIndex(u8),
    #[error("map does not fix the zero section (residual {residual} at base {base})")]
    ZeroSectionNotFixed { base: f64, residual: f64 },
    #[error("no radius on the ladder is certified")]
    NoSafeRadius,
    #[error("radius {r} exceeds r_max = {r_max}")]
    RadiusTooLarge { r: f64, r_max: f64 },
    #[error("grid is empty")]
    EmptyGrid,
    #[error("A11 is singular at tolerance (sigma_min = {sigma_min})")]
    SingularA11 { sigma_min: f64 },
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
}
