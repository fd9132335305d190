use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ManifoldModel;
use crate::linalg::orthogonal_complement;

/// Outcome of a brute-force reach scan: the last tested distance at which
/// every probe kept a unique nearest point, and the first at which one did not.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachScan {
    pub last_pass: f64,
    pub first_fail: Option<f64>,
}

const DENSE: usize = 2048;

/// Probe points `x + d n` with `n` a unit vector normal to `S` (in the full
/// ambient normal space, not only the modelled frame) and check that the
/// nearest point of `S`, found by dense sampling, is unique and equal to `x`.
pub fn scan_reach(
    model: &ManifoldModel,
    levels: &[f64],
    base_samples: usize,
    directions: usize,
    seed: u64,
) -> ReachScan {
    let (lo, hi) = model.param_range();
    let periodic = model.is_periodic();
    let dense_step = if periodic {
        (hi - lo) / DENSE as f64
    } else {
        (hi - lo) / (DENSE - 1) as f64
    };
    let dense: Vec<(f64, DVector<f64>)> = (0..DENSE)
        .map(|i| {
            let t = lo + i as f64 * dense_step;
            (t, model.point_of(t))
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last_pass = 0.0;
    for &d in levels {
        let mut ok = true;
        'outer: for i in 0..base_samples {
            let x = if periodic {
                lo + (hi - lo) * i as f64 / base_samples as f64
            } else {
                // keep away from the ends so the foot point is interior
                lo + (hi - lo) * (i as f64 + 0.5) / base_samples as f64
            };
            let p = model.point_of(x);
            let comp = orthogonal_complement(&model.tangent_frame(x));
            let m = comp.ncols();
            let mut dirs: Vec<DVector<f64>> = Vec::new();
            for j in 0..m {
                dirs.push(comp.column(j).into_owned());
                dirs.push(-comp.column(j).into_owned());
            }
            for _ in 0..directions {
                let c: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
                let v = &comp * DVector::from_vec(c);
                let n = v.norm();
                if n > 1e-6 {
                    dirs.push(v / n);
                }
            }
            for n in dirs {
                let q = &p + n * d;
                let dist: Vec<f64> = dense.iter().map(|(_, y)| (y - &q).norm()).collect();
                let best = dist.iter().cloned().fold(f64::INFINITY, f64::min);
                if best < d - 1e-9 {
                    ok = false;
                    break 'outer;
                }
                let tol = 1e-12 * (1.0 + d);
                for (k, &dk) in dist.iter().enumerate() {
                    if dk <= best + tol {
                        let sep = model.geodesic_distance(dense[k].0, x);
                        if sep > 4.0 * dense_step {
                            ok = false;
                            break 'outer;
                        }
                    }
                }
            }
        }
        if ok {
            last_pass = d;
        } else {
            return ReachScan {
                last_pass,
                first_fail: Some(d),
            };
        }
    }
    ReachScan {
        last_pass,
        first_fail: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{make_circle_model, FibreRanks};

    #[test]
    fn unit_circle_reach_is_one() {
        let m = make_circle_model(FibreRanks::new(0, 1, 1).unwrap());
        let levels = [0.25, 0.5, 0.9, 0.99, 1.0, 1.01, 1.2];
        let scan = scan_reach(&m, &levels, 24, 4, 1);
        assert_eq!(scan.last_pass, 0.99);
        assert_eq!(scan.first_fail, Some(1.0));
        assert!((m.reach() - 1.0).abs() <= 0.01);
    }
}
