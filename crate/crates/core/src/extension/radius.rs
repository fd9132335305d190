use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::grid::base_nodes;
use super::{BundleMap, ExtensionError};
use crate::manifold::{BundlePoint, ManifoldModel};
use crate::tolerances::BOUNDARY_DRIFT;

/// Certified radii: `r0` (well-definedness), `r1` (base displacement within
/// the convexity radius) and `r_max = min(r0, r1) / 4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SafeRadii {
    pub r0: f64,
    pub r1: f64,
    pub r_max: f64,
}

/// Sampling density for the radius ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusProbe {
    pub base_nodes: usize,
    pub shells: usize,
    pub random_directions: usize,
    pub seed: u64,
}

impl Default for RadiusProbe {
    fn default() -> Self {
        RadiusProbe {
            base_nodes: 32,
            shells: 4,
            random_directions: 8,
            seed: 0,
        }
    }
}

const LADDER: usize = 21;
const COLLAR_LEVELS: usize = 7;

fn sample_bases(model: &ManifoldModel, n: usize) -> Vec<f64> {
    let mut xs = base_nodes(model, n);
    if let Some((lo, hi)) = model.boundary() {
        let depth = model.convexity_radius().min(0.25 * (hi - lo));
        for j in 0..COLLAR_LEVELS {
            let t = depth * 0.5f64.powi(j as i32);
            xs.push(lo + t);
            xs.push(hi - t);
        }
    }
    xs
}

fn unit_directions(k: usize, extra: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut dirs = Vec::new();
    for i in 0..k {
        for sgn in [1.0, -1.0] {
            let mut v = DVector::zeros(k);
            v[i] = sgn;
            dirs.push(v);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while dirs.len() < 2 * k + extra {
        let v = DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 {
            dirs.push(v / n);
        }
    }
    dirs
}

/// Walks the ladder `r_S 2^{-k}`, `k = 0..20`, and returns the largest rung
/// on which the sampled base displacement stays within `r_S` (and, on
/// curves with boundary, the image stays in the curve and collar depth is
/// retained to within half), and likewise for `c_S`.
pub fn find_safe_radius(
    map: &dyn BundleMap,
    model: &ManifoldModel,
    probe: &RadiusProbe,
) -> Result<SafeRadii, ExtensionError> {
    let k = model.fibre_dim();
    let xs = sample_bases(model, probe.base_nodes);
    for &x in &xs {
        let y = map.eval(&BundlePoint::zero_section(x, k));
        let residual = model.base_difference(y.base, x).abs() + y.fibre.norm();
        if !(residual <= 1e-10) {
            return Err(ExtensionError::ZeroSectionNotFixed { base: x, residual });
        }
    }
    let dirs = unit_directions(k, probe.random_directions, probe.seed);
    let reach = model.reach();
    let mut r0 = None;
    let mut r1 = None;
    for rung in 0..LADDER {
        if r0.is_some() && r1.is_some() {
            break;
        }
        let rho = reach * 0.5f64.powi(rung as i32);
        let (ok0, ok1) = certify(map, model, &xs, &dirs, rho, probe.shells);
        if r0.is_none() && ok0 {
            r0 = Some(rho);
        }
        if r1.is_none() && ok1 {
            r1 = Some(rho);
        }
    }
    match (r0, r1) {
        (Some(r0), Some(r1)) => Ok(SafeRadii {
            r0,
            r1,
            r_max: 0.25 * r0.min(r1),
        }),
        _ => Err(ExtensionError::NoSafeRadius),
    }
}

fn certify(
    map: &dyn BundleMap,
    model: &ManifoldModel,
    xs: &[f64],
    dirs: &[DVector<f64>],
    rho: f64,
    shells: usize,
) -> (bool, bool) {
    if rho > map.domain_radius() {
        return (false, false);
    }
    let reach = model.reach();
    let conv = model.convexity_radius();
    let boundary = model.boundary();
    let collar = boundary.map(|(lo, hi)| model.convexity_radius().min(0.25 * (hi - lo)));
    let (mut ok0, mut ok1) = (true, true);
    for &x in xs {
        for d in dirs {
            for j in 1..=shells.max(1) {
                let v = d * (rho * j as f64 / shells.max(1) as f64);
                let y = map.eval(&BundlePoint::new(x, v));
                if !y.is_finite() {
                    return (false, false);
                }
                let disp = model.geodesic_distance(x, y.base);
                if disp > conv {
                    ok1 = false;
                }
                if disp > reach {
                    ok0 = false;
                }
                if let (Some((lo, hi)), Some(depth)) = (boundary, collar) {
                    if y.base < lo || y.base > hi {
                        ok0 = false;
                        ok1 = false;
                    }
                    let t = x - lo;
                    let s = hi - x;
                    let allowed = |t: f64| (0.5 * t).max(BOUNDARY_DRIFT);
                    if t <= depth && ((y.base - lo) - t).abs() > allowed(t) {
                        ok0 = false;
                    }
                    if s <= depth && ((hi - y.base) - s).abs() > allowed(s) {
                        ok0 = false;
                    }
                }
                if !ok0 && !ok1 {
                    return (false, false);
                }
            }
        }
    }
    (ok0, ok1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{
        make_arc_model, make_circle_model, make_shear_benchmark, BlockSpec, FibreRanks, LinearBundleMap, ShearProfile,
    };
    use nalgebra::DMatrix;
    use std::f64::consts::PI;

    #[test]
    fn linear_map_certifies_full_reach() {
        let m = make_circle_model(FibreRanks::new(1, 1, 1).unwrap());
        let lin = LinearBundleMap {
            matrix: DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0, 0.5])),
        };
        let r = find_safe_radius(&lin, &m, &RadiusProbe::default()).unwrap();
        assert_eq!(r.r0, m.reach());
        assert_eq!(r.r_max, 0.25 * r.r0.min(r.r1));
    }

    #[test]
    fn drifting_shear_meets_displacement_estimate() {
        let m = make_circle_model(FibreRanks::new(1, 1, 1).unwrap());
        let b = make_shear_benchmark(
            &m,
            BlockSpec {
                unstable: vec![2.0],
                centre: vec![1.0],
                stable: vec![0.5],
                kappa: 0.5,
                base_drift: 3.0,
                stable_cubic: 0.0,
            },
            ShearProfile {
                amplitude: 0.1,
                modulation: 0.5,
                direction: vec![1.0],
            },
        )
        .unwrap();
        let probe = RadiusProbe::default();
        let radii = find_safe_radius(b.map.as_ref(), &m, &probe).unwrap();
        // displacement constant C1 measured on the same samples at the top rung
        let dirs = unit_directions(3, probe.random_directions, probe.seed);
        let mut c1: f64 = 0.0;
        for x in sample_bases(&m, probe.base_nodes) {
            for d in &dirs {
                for j in 1..=probe.shells {
                    let v = d * (m.reach() * j as f64 / probe.shells as f64);
                    let y = b.map.eval(&BundlePoint::new(x, v.clone()));
                    c1 = c1.max(m.geodesic_distance(x, y.base) / v.norm());
                }
            }
        }
        let target = (m.reach() / c1).min(m.reach());
        // the ladder is dyadic, so the certified rung is within a factor 2
        assert!(radii.r0 >= 0.5 * target, "{} vs {}", radii.r0, target);
    }

    struct Translate;
    impl BundleMap for Translate {
        fn fibre_dim(&self) -> usize {
            2
        }
        fn eval(&self, p: &BundlePoint) -> BundlePoint {
            BundlePoint::new(p.base + 0.1 * p.fibre.norm(), p.fibre.clone())
        }
    }

    #[test]
    fn boundary_drift_has_no_safe_radius() {
        let m = make_arc_model(PI / 4.0, 3.0 * PI / 4.0, FibreRanks::new(0, 1, 1).unwrap()).unwrap();
        assert!(matches!(
            find_safe_radius(&Translate, &m, &RadiusProbe::default()),
            Err(ExtensionError::NoSafeRadius)
        ));
    }

    struct Shifted;
    impl BundleMap for Shifted {
        fn fibre_dim(&self) -> usize {
            1
        }
        fn eval(&self, p: &BundlePoint) -> BundlePoint {
            BundlePoint::new(p.base + 0.01, p.fibre.clone())
        }
    }

    #[test]
    fn moving_zero_section_is_rejected() {
        let m = make_circle_model(FibreRanks::new(0, 0, 1).unwrap());
        assert!(matches!(
            find_safe_radius(&Shifted, &m, &RadiusProbe::default()),
            Err(ExtensionError::ZeroSectionNotFixed { .. })
        ));
    }
}
