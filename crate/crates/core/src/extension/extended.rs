use std::sync::Arc;

use log::warn;
use nalgebra::{DMatrix, DVector};

use super::bump::phi;
use super::{BundleMap, ExtensionError, SafeRadii};
use crate::manifold::{BundlePoint, ManifoldModel};

/// `f^r(x, v) = phi_1 f(x, phi_2 v) + (1 - phi_1) P(x, f_S(x, phi_2 v)) L(x) v`
/// with `L(x) = D_v f_v(x, 0)`. Equal to `f` on `|v| <= r` and to the
/// linearisation on `|v| >= 4r`.
#[derive(Clone)]
pub struct ExtendedMap {
    inner: Arc<dyn BundleMap>,
    model: ManifoldModel,
    r: f64,
}

pub fn extend_map(
    map: Arc<dyn BundleMap>,
    model: &ManifoldModel,
    r: f64,
    radii: &SafeRadii,
) -> Result<ExtendedMap, ExtensionError> {
    if !(r > 0.0) {
        return Err(ExtensionError::NonpositiveRadius(r));
    }
    if r > radii.r_max {
        return Err(ExtensionError::RadiusTooLarge { r, r_max: radii.r_max });
    }
    Ok(ExtendedMap {
        inner: map,
        model: model.clone(),
        r,
    })
}

impl ExtendedMap {
    /// Extension without a radius certificate, for callers that have
    /// certified `r` by other means.
    pub fn new_unchecked(map: Arc<dyn BundleMap>, model: &ManifoldModel, r: f64) -> Self {
        ExtendedMap {
            inner: map,
            model: model.clone(),
            r,
        }
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn model(&self) -> &ManifoldModel {
        &self.model
    }

    pub fn inner(&self) -> &Arc<dyn BundleMap> {
        &self.inner
    }

    /// Same map data, different radius.
    pub fn with_radius(&self, r: f64) -> Self {
        ExtendedMap {
            inner: self.inner.clone(),
            model: self.model.clone(),
            r,
        }
    }

    /// The linearisation `(x, L(x) v)`.
    pub fn linear_part(&self, p: &BundlePoint) -> BundlePoint {
        BundlePoint::new(p.base, self.inner.normal_linearization(p.base) * &p.fibre)
    }

    pub fn try_eval(&self, p: &BundlePoint) -> Result<BundlePoint, ExtensionError> {
        let nv = p.fibre.norm();
        let r = self.r;
        if nv <= r {
            return Ok(self.inner.eval(p));
        }
        let l = self.inner.normal_linearization(p.base);
        if nv >= 4.0 * r {
            return Ok(BundlePoint::new(p.base, l * &p.fibre));
        }
        let phi1 = phi(nv / r);
        let phi2 = phi(nv / (2.0 * r));
        let y = self.inner.eval(&BundlePoint::new(p.base, &p.fibre * phi2));
        let lin: DVector<f64> = l * &p.fibre;
        let lin = if self.model.has_trivial_transport() {
            lin
        } else {
            self.model.transport(p.base, y.base)? * lin
        };
        Ok(BundlePoint::new(y.base, y.fibre * phi1 + lin * (1.0 - phi1)))
    }
}

impl BundleMap for ExtendedMap {
    fn fibre_dim(&self) -> usize {
        self.inner.fibre_dim()
    }

    /// Transport failures (base displacement beyond the convexity radius)
    /// yield a non-finite fibre, which downstream solvers reject.
    fn eval(&self, p: &BundlePoint) -> BundlePoint {
        match self.try_eval(p) {
            Ok(y) => y,
            Err(e) => {
                warn!("extension evaluation failed: {e}");
                BundlePoint::new(p.base, DVector::from_element(p.fibre.len(), f64::NAN))
            }
        }
    }

    fn normal_linearization(&self, base: f64) -> DMatrix<f64> {
        self.inner.normal_linearization(base)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{make_circle_model, make_shear_benchmark, BlockSpec, FibreRanks, ShearProfile};

    fn bench() -> (ManifoldModel, Arc<dyn BundleMap>, ShearProfile) {
        let m = make_circle_model(FibreRanks::new(1, 1, 1).unwrap());
        let b = make_shear_benchmark(
            &m,
            BlockSpec {
                unstable: vec![2.0],
                centre: vec![1.0],
                stable: vec![0.5],
                kappa: 0.5,
                base_drift: 0.2,
                stable_cubic: 0.3,
            },
            ShearProfile {
                amplitude: 0.1,
                modulation: 0.5,
                direction: vec![1.0],
            },
        )
        .unwrap();
        (m, b.map, b.oracle)
    }

    #[test]
    fn exact_branches() {
        let (m, f, _) = bench();
        let ext = ExtendedMap::new_unchecked(f.clone(), &m, 0.1);
        let inside = BundlePoint::from_slice(0.3, &[0.05, -0.04, 0.02]);
        assert_eq!(ext.eval(&inside), f.eval(&inside));
        let outside = BundlePoint::from_slice(0.3, &[0.3, -0.3, 0.1]);
        assert_eq!(ext.eval(&outside), ext.linear_part(&outside));
    }

    #[test]
    fn blend_region_matches_hand_formula() {
        let (m, f, psi) = bench();
        let r = 0.1;
        let ext = ExtendedMap::new_unchecked(f, &m, r);
        let h = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
        let bump = |t: f64| h(2.0 - t) / (h(2.0 - t) + h(t - 1.0));
        // benchmark map written out directly
        let hand_f = |x: f64, w: &[f64]| {
            let s0 = w[2] - psi.value(x, &w[..2])[0];
            let q2 = w[0] * w[0] + w[1] * w[1];
            let x1 = x + 0.2 * (q2 + s0 * s0);
            let q1 = [2.0 * w[0], w[1]];
            let s1 = 0.5 * s0 + 0.3 * q2 * s0 + psi.value(x1, &q1)[0];
            (x1, [q1[0], q1[1], s1])
        };
        let x = 0.8;
        for ratio in [1.5, 2.5] {
            let dir = [0.15, -0.17, 0.11];
            let nd = (dir.iter().map(|a| a * a).sum::<f64>()).sqrt();
            let v: Vec<f64> = dir.iter().map(|a| a * ratio * r / nd).collect();
            let phi1 = if ratio <= 1.0 {
                1.0
            } else if ratio >= 2.0 {
                0.0
            } else {
                bump(ratio)
            };
            let t2 = ratio / 2.0;
            let phi2 = if t2 <= 1.0 { 1.0 } else { bump(t2) };
            let w: Vec<f64> = v.iter().map(|a| a * phi2).collect();
            let (base, fw) = hand_f(x, &w);
            let lin = [2.0 * v[0], v[1], 0.5 * v[2]];
            let got = ext.eval(&BundlePoint::from_slice(x, &v));
            assert!((got.base - base).abs() <= 1e-14);
            for i in 0..3 {
                let want = phi1 * fw[i] + (1.0 - phi1) * lin[i];
                assert!((got.fibre[i] - want).abs() <= 1e-14, "{ratio} {i}");
            }
        }
    }

    #[test]
    fn zero_section_fixed() {
        let (m, f, _) = bench();
        let ext = ExtendedMap::new_unchecked(f, &m, 0.05);
        for i in 0..30 {
            let x = 0.2 * i as f64;
            let y = ext.eval(&BundlePoint::zero_section(x, 3));
            assert!((y.base - x).abs() <= 1e-12 && y.fibre.amax() <= 1e-12);
        }
    }

    #[test]
    fn radius_above_r_max_rejected() {
        let (m, f, _) = bench();
        let radii = SafeRadii {
            r0: 1.0,
            r1: 1.0,
            r_max: 0.25,
        };
        assert!(matches!(
            extend_map(f.clone(), &m, 0.3, &radii),
            Err(ExtensionError::RadiusTooLarge { .. })
        ));
        assert!(extend_map(f, &m, 0.2, &radii).is_ok());
    }
}
