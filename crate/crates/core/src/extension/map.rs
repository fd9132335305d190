use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::linalg::fd_jacobian;
use crate::manifold::BundlePoint;

/// A map written in bundle coordinates `(base, fibre)`.
///
/// Output base parameters are not wrapped, so finite differences in the
/// base direction stay continuous.
pub trait BundleMap: Send + Sync {
    fn fibre_dim(&self) -> usize;

    fn eval(&self, p: &BundlePoint) -> BundlePoint;

    /// Jacobian on flattened `(base, fibre)` coordinates.
    fn jacobian(&self, p: &BundlePoint) -> DMatrix<f64> {
        fd_jacobian(|v| self.eval(&BundlePoint::from_vector(v)).to_vector(), &p.to_vector())
    }

    /// `D_v f_v(x, 0)`, the fibre block of the derivative on the zero section.
    fn normal_linearization(&self, base: f64) -> DMatrix<f64> {
        let k = self.fibre_dim();
        let zero = DVector::zeros(k);
        fd_jacobian(|v| self.eval(&BundlePoint::new(base, v.clone())).fibre, &zero)
    }

    /// Radius of the tube on which `eval` is trusted.
    fn domain_radius(&self) -> f64 {
        f64::INFINITY
    }
}

impl<T: BundleMap + ?Sized> BundleMap for Arc<T> {
    fn fibre_dim(&self) -> usize {
        (**self).fibre_dim()
    }
    fn eval(&self, p: &BundlePoint) -> BundlePoint {
        (**self).eval(p)
    }
    fn jacobian(&self, p: &BundlePoint) -> DMatrix<f64> {
        (**self).jacobian(p)
    }
    fn normal_linearization(&self, base: f64) -> DMatrix<f64> {
        (**self).normal_linearization(base)
    }
    fn domain_radius(&self) -> f64 {
        (**self).domain_radius()
    }
}

/// The linear bundle map `(x, v) -> (x, D_v f_v(x, 0) v)`.
pub struct Linearization {
    inner: Arc<dyn BundleMap>,
}

impl Linearization {
    pub fn new(inner: Arc<dyn BundleMap>) -> Self {
        Linearization { inner }
    }
}

impl BundleMap for Linearization {
    fn fibre_dim(&self) -> usize {
        self.inner.fibre_dim()
    }

    fn eval(&self, p: &BundlePoint) -> BundlePoint {
        BundlePoint::new(p.base, self.inner.normal_linearization(p.base) * &p.fibre)
    }

    fn normal_linearization(&self, base: f64) -> DMatrix<f64> {
        self.inner.normal_linearization(base)
    }
}
