use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::ClarkeError;
use crate::linalg::{fd_jacobian, fd_jacobian_one_sided, fd_jacobian_step, fd_step, op_norm, sigma_min};

/// Ratio between the forward/backward discrepancy allowed at a sample and
/// the finite-difference floor.
pub const AGREEMENT_FACTOR: f64 = 10.0;

/// Sampled approximation of the Clarke derivative at `center`: Jacobians at
/// differentiable points of the `radius`-ball.
#[derive(Debug, Clone)]
pub struct ClarkeSampleSet {
    pub center: DVector<f64>,
    pub radius: f64,
    pub points: Vec<DVector<f64>>,
    pub jacobians: Vec<DMatrix<f64>>,
    /// Samples rejected by the forward/backward test.
    pub discarded: usize,
    pub sigma_max: f64,
    pub sigma_min: f64,
}

impl ClarkeSampleSet {
    pub fn len(&self) -> usize {
        self.jacobians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jacobians.is_empty()
    }

    /// Range of entry `(i, j)` over the samples; for a scalar function of
    /// one variable this is the hull itself.
    pub fn entry_range(&self, i: usize, j: usize) -> (f64, f64) {
        self.jacobians
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| {
                (lo.min(m[(i, j)]), hi.max(m[(i, j)]))
            })
    }

    /// Whether some sample lies within `tol` (max-norm) of `m`.
    pub fn contains_near(&self, m: &DMatrix<f64>, tol: f64) -> bool {
        self.jacobians
            .iter()
            .any(|j| j.shape() == m.shape() && (j - m).amax() <= tol)
    }
}

/// Stream-split generator for sample `i`, so that a sample depends only on
/// `(seed, i)`.
fn sample_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

/// Uniform point of the closed ball of radius `rho` about `x`.
fn ball_point(rng: &mut ChaCha8Rng, x: &DVector<f64>, rho: f64) -> DVector<f64> {
    let n = x.len();
    loop {
        let g = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = g.norm();
        if norm > 0.0 {
            let u: f64 = rng.random();
            return x + g * (rho * u.powf(1.0 / n as f64) / norm);
        }
    }
}

/// Central-difference Jacobian at `p`, or `None` when forward and backward
/// differences disagree by more than [`AGREEMENT_FACTOR`] times the floor
/// `sqrt(h) * max(1, |J|)`, or when the central differences at steps `h`
/// and `h / 2` disagree by as much. Smooth curvature moves these by `O(h)`,
/// a kink within `h` of `p` by `O(1)`.
pub fn differentiable_jacobian<F>(f: &F, p: &DVector<f64>) -> Option<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let fwd = fd_jacobian_one_sided(f, p, 1.0);
    let bwd = fd_jacobian_one_sided(f, p, -1.0);
    let central = fd_jacobian(f, p);
    if !central.iter().all(|v| v.is_finite()) {
        return None;
    }
    let h = fd_step(p.norm());
    let half = fd_jacobian_step(f, p, 0.5 * h);
    let floor = AGREEMENT_FACTOR * h.sqrt() * central.amax().max(1.0);
    ((fwd - bwd).amax() <= floor && (&central - half).amax() <= floor).then_some(central)
}

fn summarise(jacobians: &[DMatrix<f64>]) -> (f64, f64) {
    let smax = jacobians.iter().map(op_norm).fold(f64::NEG_INFINITY, f64::max);
    let smin = jacobians.iter().map(sigma_min).fold(f64::INFINITY, f64::min);
    (smax, smin)
}

/// Jacobians at `count` uniform samples of the `rho`-ball about `x`, keeping
/// only points that pass the differentiability test. Sample `i` depends only
/// on `(seed, i)`, so a larger `count` extends a smaller one.
pub fn sample_jacobians<F>(
    f: &F,
    x: &DVector<f64>,
    rho: f64,
    count: usize,
    seed: u64,
) -> Result<ClarkeSampleSet, ClarkeError>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Sync,
{
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(ClarkeError::InvalidInput(format!("radius {rho} must be positive")));
    }
    if count < 8 {
        return Err(ClarkeError::InvalidInput(format!("count {count} is below 8")));
    }
    if x.is_empty() {
        return Err(ClarkeError::InvalidInput("empty centre".into()));
    }
    let results: Vec<(DVector<f64>, Option<DMatrix<f64>>)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let p = ball_point(&mut rng, x, rho);
            let j = differentiable_jacobian(f, &p);
            (p, j)
        })
        .collect();
    let mut points = Vec::with_capacity(count);
    let mut jacobians = Vec::with_capacity(count);
    for (p, j) in results {
        if let Some(j) = j {
            points.push(p);
            jacobians.push(j);
        }
    }
    if jacobians.is_empty() {
        return Err(ClarkeError::NoDifferentiablePoints { count });
    }
    let (sigma_max, sigma_min) = summarise(&jacobians);
    log::debug!(
        "clarke samples: kept {} of {count}, sigma_max {sigma_max}, sigma_min {sigma_min}",
        jacobians.len()
    );
    Ok(ClarkeSampleSet {
        center: x.clone(),
        radius: rho,
        discarded: count - jacobians.len(),
        points,
        jacobians,
        sigma_max,
        sigma_min,
    })
}

/// Largest operator norm over the samples. Since `|.|_op` is convex its sup
/// over the hull is attained at sampled vertices.
pub fn clarke_opnorm(set: &ClarkeSampleSet) -> Result<f64, ClarkeError> {
    if set.is_empty() {
        return Err(ClarkeError::EmptySet);
    }
    Ok(summarise(&set.jacobians).0)
}

/// Smallest `sigma_min` over the samples. This is only an upper bound for
/// the infimum over the hull, which can be smaller.
pub fn clarke_sigma_min(set: &ClarkeSampleSet) -> Result<f64, ClarkeError> {
    if set.is_empty() {
        return Err(ClarkeError::EmptySet);
    }
    Ok(summarise(&set.jacobians).1)
}

/// Indices of up to `k` mutually distant samples (greedy farthest point in
/// the max norm).
fn spread_vertices(jacobians: &[DMatrix<f64>], k: usize) -> Vec<usize> {
    let mut chosen = vec![0];
    let mut dist: Vec<f64> = jacobians.iter().map(|m| (m - &jacobians[0]).amax()).collect();
    while chosen.len() < k.min(jacobians.len()) {
        let (i, d) = dist.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |best, (i, &d)| if d > best.1 { (i, d) } else { best },
        );
        if d <= 0.0 {
            break;
        }
        chosen.push(i);
        for (j, m) in jacobians.iter().enumerate() {
            dist[j] = dist[j].min((m - &jacobians[i]).amax());
        }
    }
    chosen
}

/// `sigma_min` over segments between up to `vertices` spread-out samples,
/// at `steps + 1` points per segment. An upper bound for the hull infimum
/// that is never above [`clarke_sigma_min`].
pub fn hull_sigma_min(set: &ClarkeSampleSet, vertices: usize, steps: usize) -> Result<f64, ClarkeError> {
    if set.is_empty() {
        return Err(ClarkeError::EmptySet);
    }
    let steps = steps.max(1);
    let idx = spread_vertices(&set.jacobians, vertices.max(1));
    let mut best = clarke_sigma_min(set)?;
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            for s in 1..steps {
                let t = s as f64 / steps as f64;
                let m = &set.jacobians[i] * (1.0 - t) + &set.jacobians[j] * t;
                best = best.min(sigma_min(&m));
            }
        }
    }
    Ok(best)
}

/// Outcome of comparing the Lipschitz constant on a box with the sup of the
/// Clarke norm over it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipClarkeCheck {
    /// Largest difference quotient over sample pairs.
    pub lip_estimate: f64,
    /// Largest `|J|_op` over sampled Jacobians.
    pub clarke_sup_estimate: f64,
    /// `|lip_estimate - clarke_sup_estimate|`.
    pub gap: f64,
    pub samples: usize,
    pub discarded: usize,
}

impl LipClarkeCheck {
    /// `lip >= clarke - tol`, which holds on any convex box.
    pub fn consistent(&self, tol: f64) -> bool {
        self.lip_estimate >= self.clarke_sup_estimate - tol
    }
}

/// Samples `samples` uniform points of the box and compares the largest
/// pairwise difference quotient with the largest sampled Clarke norm. The
/// box is convex by construction.
pub fn lip_vs_clarke_check<F>(
    f: &F,
    bounds: &[(f64, f64)],
    samples: usize,
    seed: u64,
) -> Result<LipClarkeCheck, ClarkeError>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Sync,
{
    if bounds.is_empty()
        || bounds
            .iter()
            .any(|&(lo, hi)| !(hi > lo) || !lo.is_finite() || !hi.is_finite())
    {
        return Err(ClarkeError::DegenerateBox);
    }
    if samples < 2 {
        return Err(ClarkeError::InvalidInput("need at least two samples".into()));
    }
    let pts: Vec<DVector<f64>> = (0..samples)
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            DVector::from_iterator(bounds.len(), bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)))
        })
        .collect();
    let vals: Vec<DVector<f64>> = pts.par_iter().map(f).collect();
    let lip_estimate = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut worst: f64 = 0.0;
            for j in i + 1..samples {
                let d = (&pts[i] - &pts[j]).norm();
                if d > 0.0 {
                    worst = worst.max((&vals[i] - &vals[j]).norm() / d);
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    let jac: Vec<Option<f64>> = pts
        .par_iter()
        .map(|p| differentiable_jacobian(f, p).map(|j| op_norm(&j)))
        .collect();
    let discarded = jac.iter().filter(|j| j.is_none()).count();
    if discarded == samples {
        return Err(ClarkeError::NoDifferentiablePoints { count: samples });
    }
    let clarke_sup_estimate = jac.into_iter().flatten().fold(f64::NEG_INFINITY, f64::max);
    Ok(LipClarkeCheck {
        lip_estimate,
        clarke_sup_estimate,
        gap: (lip_estimate - clarke_sup_estimate).abs(),
        samples,
        discarded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemicontinuityRung {
    pub radius: f64,
    /// `sigma_max` estimate on the `radius`-ball about the centre.
    pub center_estimate: f64,
    /// Largest estimate at points `radius` away, each on a ball of
    /// `radius / 4`.
    pub nearby_estimate: f64,
    pub tolerance: f64,
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemicontinuityReport {
    pub rungs: Vec<SemicontinuityRung>,
    pub violations: usize,
}

/// Ladder check of upper semicontinuity of `x -> sup |Df(x)|_op`: at each
/// radius `rho` the estimate at `directions` points on the sphere of radius
/// `rho` must not exceed the centre estimate by more than
/// `tol_slope * rho + 1e-8`.
pub fn semicontinuity_probe<F>(
    f: &F,
    x: &DVector<f64>,
    radii: &[f64],
    directions: usize,
    count: usize,
    tol_slope: f64,
    seed: u64,
) -> Result<SemicontinuityReport, ClarkeError>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Sync,
{
    if radii.is_empty() || radii.windows(2).any(|w| !(w[1] < w[0])) || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(ClarkeError::InvalidInput(
            "radii must be positive and strictly decreasing".into(),
        ));
    }
    let mut rungs = Vec::with_capacity(radii.len());
    for (k, &rho) in radii.iter().enumerate() {
        let rung_seed = seed.wrapping_add(k as u64 * 0x1_0000);
        let center_estimate = clarke_opnorm(&sample_jacobians(f, x, rho, count, rung_seed)?)?;
        let mut rng = sample_rng(rung_seed ^ 0x5eed, usize::MAX);
        let mut nearby_estimate = f64::NEG_INFINITY;
        for d in 0..directions.max(1) {
            let g = DVector::from_fn(x.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
            let y = x + g.normalize() * rho;
            let set = sample_jacobians(f, &y, 0.25 * rho, count, rung_seed.wrapping_add(d as u64 + 1))?;
            nearby_estimate = nearby_estimate.max(clarke_opnorm(&set)?);
        }
        let tolerance = tol_slope * rho + 1e-8;
        rungs.push(SemicontinuityRung {
            radius: rho,
            center_estimate,
            nearby_estimate,
            tolerance,
            violation: nearby_estimate > center_estimate + tolerance,
        });
    }
    let violations = rungs.iter().filter(|r| r.violation).count();
    Ok(SemicontinuityReport { rungs, violations })
}

/// JSON summary of a sampled Clarke derivative.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub center: Vec<f64>,
    pub radius: f64,
    pub count: usize,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub caveats: Vec<String>,
}

impl ProbeReport {
    pub fn from_set(set: &ClarkeSampleSet) -> Self {
        let mut caveats = vec![
            "sigma_max is a sample maximum and a lower bound for the sup over the Clarke derivative".to_string(),
            "sigma_min is a sample estimate; the infimum over the convex hull can be smaller".to_string(),
        ];
        if set.discarded > 0 {
            caveats.push(format!(
                "{} samples failed the forward/backward differentiability test",
                set.discarded
            ));
        }
        ProbeReport {
            center: set.center.iter().copied().collect(),
            radius: set.radius,
            count: set.len(),
            sigma_max: set.sigma_max,
            sigma_min: set.sigma_min,
            caveats,
        }
    }
}
