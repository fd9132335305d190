//! Graph transform on Lipschitz sections over the centre-unstable tube:
//! inversion of the overflowing base map, Picard sweeps to the invariant
//! section, and checks on the result.

mod checks;
mod config;
mod diagnostics;
mod section;
mod solve;

pub use checks::{invariance_residual, reconstruct_manifold, tangency_check, ReconstructedPoint};
pub use config::TransformConfig;
pub use diagnostics::{derivative_bound_trace, DerivativeReport, SweepDiagnostics};
pub use section::{random_admissible_section, BaseAxis, Section, SectionDump, SectionGrid};
pub use solve::{
    apply_graph_transform, base_speed, contraction_ratio, invert_cu, section_grid, solve_fixed_section, solve_from,
    CuInverse, SolveTrace,
};

use thiserror::Error;

use crate::extension::ExtensionError;
use crate::manifold::ManifoldError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("invalid transform configuration: {0}")]
    InvalidConfig(String),
    #[error("point outside the section's fibre box")]
    OutsideBox,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("Newton inversion diverged at target base {base}, fibre {fibre:?} (residual {residual})")]
    NewtonDiverged { base: f64, fibre: Vec<f64>, residual: f64 },
    #[error("no convergence after {sweeps} sweeps (last residual {last})")]
    MaxSweepsExceeded {
        sweeps: usize,
        last: f64,
        residuals: Vec<f64>,
    },
    #[error("sections are identical")]
    IdenticalSections,
    #[error("finite-difference step {h} is below twice the grid spacing {spacing}")]
    StepTooSmall { h: f64, spacing: f64 },
    #[error("sample image left the reconstructed tube (|q| = {norm}, limit {limit})")]
    SampleEscaped { norm: f64, limit: f64 },
    #[error("derivative history was not recorded")]
    HistoryMissing,
    #[error(transparent)]
    Extension(#[from] ExtensionError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
}
