//! Compact fixed-point curves in Euclidean space with split, trivialised
//! normal bundles.

mod benchmark;
mod model;
mod reach;

pub use benchmark::{make_shear_benchmark, BlockSpec, LinearBundleMap, ShearBenchmark, ShearMap, ShearProfile};
pub use model::{
    check_frames, make_arc_model, make_circle_model, make_curve_model, BundlePoint, CurveDomain, CurveSpec, FibreRanks,
    FrameCheck, Geometry, ManifoldModel,
};
pub use reach::{scan_reach, ReachScan};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ManifoldError {
    #[error("fibre norm {norm} is not below the reach {reach}")]
    FibreOutOfReach { norm: f64, reach: f64 },
    #[error("point at distance {distance} has no unique nearest point within reach {reach}")]
    OutsideReach { distance: f64, reach: f64 },
    #[error("point is off the modelled tube (residual {residual})")]
    OffTube { residual: f64 },
    #[error("base points {x} and {y} are {distance} apart, beyond the convexity radius {radius}")]
    BeyondConvexityRadius { x: f64, y: f64, distance: f64, radius: f64 },
    #[error("invalid fibre ranks ({0}, {1}, {2})")]
    InvalidRanks(i64, i64, i64),
    #[error("degenerate arc [{lo}, {hi}]")]
    DegenerateArc { lo: f64, hi: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("spectral block violation: {0}")]
    SpectralViolation(String),
    #[error("shear profile violation: {0}")]
    ShearViolation(String),
    #[error("invalid curve model: {0}")]
    InvalidCurve(String),
}
