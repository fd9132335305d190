use serde::{Deserialize, Serialize};

use super::TransformError;
use crate::tolerances::{FIXED_POINT_TOL, NEWTON_TOL};

/// Solver parameters. `epsilon` and `kappa` must satisfy
/// `(kappa + 2 eps)(1 + eps) / (1 - 2 eps) <= 1`, and the first derivative
/// recursion rate `(kappa + 2 eps)(1 + eps)^2 / (1 - 2 eps)^3` must be below 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformConfig {
    pub r: f64,
    pub epsilon: f64,
    pub kappa: f64,
    pub base_nodes: usize,
    pub fibre_nodes: usize,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_max_iter")]
    pub newton_max_iter: usize,
    #[serde(default = "default_fixed_point_tol")]
    pub fixed_point_tol: f64,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
    #[serde(default = "default_true")]
    pub track_derivatives: bool,
}

fn default_newton_tol() -> f64 {
    NEWTON_TOL
}
fn default_newton_max_iter() -> usize {
    60
}
fn default_fixed_point_tol() -> f64 {
    FIXED_POINT_TOL
}
fn default_max_sweeps() -> usize {
    200
}
fn default_true() -> bool {
    true
}

impl TransformConfig {
    pub fn new(r: f64, epsilon: f64, kappa: f64, base_nodes: usize, fibre_nodes: usize) -> Self {
        TransformConfig {
            r,
            epsilon,
            kappa,
            base_nodes,
            fibre_nodes,
            newton_tol: NEWTON_TOL,
            newton_max_iter: default_newton_max_iter(),
            fixed_point_tol: FIXED_POINT_TOL,
            max_sweeps: default_max_sweeps(),
            track_derivatives: true,
        }
    }

    /// Contraction rate `(kappa + 2 eps) / (1 - 2 eps)`.
    pub fn contraction_rate(&self) -> f64 {
        (self.kappa + 2.0 * self.epsilon) / (1.0 - 2.0 * self.epsilon)
    }

    /// Rate of the Lipschitz recursion for `D sigma`.
    pub fn rho2(&self) -> f64 {
        let e = self.epsilon;
        (self.kappa + 2.0 * e) * (1.0 + e).powi(2) / (1.0 - 2.0 * e).powi(3)
    }

    pub fn validate(&self) -> Result<(), TransformError> {
        let bad = |m: String| Err(TransformError::InvalidConfig(m));
        if !(self.r > 0.0 && self.r.is_finite()) {
            return bad(format!("r = {} must be positive", self.r));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return bad(format!("epsilon = {} must lie in (0, 1/2)", self.epsilon));
        }
        if !(self.kappa >= 0.0 && self.kappa < 1.0) {
            return bad(format!("kappa = {} must lie in [0, 1)", self.kappa));
        }
        let e = self.epsilon;
        let lhs = (self.kappa + 2.0 * e) * (1.0 + e) / (1.0 - 2.0 * e);
        if lhs > 1.0 {
            return bad(format!("(kappa + 2 eps)(1 + eps)/(1 - 2 eps) = {lhs:.6} exceeds 1"));
        }
        if self.track_derivatives && self.rho2() >= 1.0 {
            return bad(format!(
                "(kappa + 2 eps)(1 + eps)^2/(1 - 2 eps)^3 = {:.6} is not below 1",
                self.rho2()
            ));
        }
        if self.base_nodes < 4 || self.fibre_nodes < 4 {
            return bad("grid resolution must be at least 4 per axis".into());
        }
        if self.fibre_nodes.is_multiple_of(2) {
            return bad("fibre node count must be odd".into());
        }
        if !(self.newton_tol > 0.0 && self.fixed_point_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.newton_max_iter == 0 || self.max_sweeps == 0 {
            return bad("iteration caps must be positive".into());
        }
        Ok(())
    }
}
