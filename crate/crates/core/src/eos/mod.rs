//! Gradient descent on the two-layer 2x2 factorisation loss, lifted to
//! `(W1, W2, eta)`: fixed-point manifold, Gauss-Newton spectrum, bad set
//! and step-size bifurcation scans.

mod problem;
mod scan;
mod spectrum;

pub use problem::{
    from_vec8, grad_step, gradient, hessian, lift_to_t, loss, mat2, minimiser_chart, rows2, singular_values2, svd2,
    to_vec8, FactorizationProblem, LiftedState, Mat8, Vec8, MINIMISER_LOSS,
};
pub use scan::{
    bifurcation_scan, classify_trajectory, factorization_base, first_departure, locate_transition, scalar_scan,
    scan_system, write_scan_csv, ClassifierThresholds, FactorizationSystem, GradientSystem, ScalarQuadratic,
    ScanParams, ScanRow, TrajectoryClass, TrajectoryOutcome,
};
pub use spectrum::{
    bad_set_gap, dg, gauss_newton_operator, kronecker_eigenpairs, lambda1, lifted_jacobian, lifted_jacobian_fd,
    lifted_map, splitting_at, state_to_vec9, tangent_of_t, top_direction, BadSetGap, Mat9, SpectralSplitReport, Vec9,
    BAD_SET_GAP,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EosError {
    #[error("chart matrix is singular (det {det})")]
    SingularChartMatrix { det: f64 },
    #[error("point is not a minimiser (loss {loss})")]
    NotOnMinimiserManifold { loss: f64 },
    #[error("top eigenvalue {0} is not positive")]
    DegenerateLambda(f64),
    #[error("point lies on the bad set (gap {gap})")]
    OnBadSet { gap: f64 },
    #[error("state is not fixed by the lifted map (residual {residual})")]
    NotFixedPoint { residual: f64 },
    #[error("bad scan base point: {0}")]
    BadBasePoint(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
