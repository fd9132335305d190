use std::collections::VecDeque;
use std::fmt;
use std::io::Write;

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problem::{from_vec8, gradient, loss, to_vec8, FactorizationProblem, MINIMISER_LOSS};
use super::spectrum::{bad_set_gap, gauss_newton_operator, lambda1, top_direction};
use super::EosError;
use crate::linalg::sym_eigen_desc;

/// Asymptotic behaviour of a gradient-descent trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrajectoryClass {
    /// Settled on the minimiser set with the starting sharpness.
    Converged,
    /// Settled on the minimiser set at a flatter point than the start.
    SharpnessAdapted,
    Period2,
    Periodic(usize),
    Escaped,
    Unresolved,
}

impl fmt::Display for TrajectoryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrajectoryClass::Converged => write!(f, "CONVERGED"),
            TrajectoryClass::SharpnessAdapted => write!(f, "SHARPNESS_ADAPTED"),
            TrajectoryClass::Period2 => write!(f, "PERIOD2"),
            TrajectoryClass::Periodic(k) => write!(f, "PERIODIC_{k}"),
            TrajectoryClass::Escaped => write!(f, "ESCAPED"),
            TrajectoryClass::Unresolved => write!(f, "UNRESOLVED"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierThresholds {
    pub converged: f64,
    pub cycle: f64,
    pub escape: f64,
    pub max_period: usize,
    /// Relative sharpness drift above `factor * delta^2` marks adaptation.
    pub sharpness_factor: f64,
}

impl Default for ClassifierThresholds {
    fn default() -> Self {
        ClassifierThresholds {
            converged: 1e-8,
            cycle: 1e-6,
            escape: 1e6,
            max_period: 8,
            sharpness_factor: 100.0,
        }
    }
}

/// Gradient descent on a loss with a known minimiser set.
pub trait GradientSystem: Sync {
    fn dim(&self) -> usize;
    /// `x <- x - eta grad l(x)`.
    fn step(&self, x: &mut [f64], eta: f64);
    /// First-order distance to the minimiser set.
    fn distance_to_minimisers(&self, x: &[f64]) -> f64;
    /// Top Hessian eigenvalue at `x`.
    fn sharpness(&self, x: &[f64]) -> f64;
}

/// `l(x) = x^2 / 2` on the line.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScalarQuadratic;

impl GradientSystem for ScalarQuadratic {
    fn dim(&self) -> usize {
        1
    }
    fn step(&self, x: &mut [f64], eta: f64) {
        x[0] -= eta * x[0];
    }
    fn distance_to_minimisers(&self, x: &[f64]) -> f64 {
        x[0].abs()
    }
    fn sharpness(&self, _x: &[f64]) -> f64 {
        1.0
    }
}

/// Two-layer 2x2 factorisation in row-major `(vec W1, vec W2)` coordinates.
#[derive(Debug, Clone)]
pub struct FactorizationSystem {
    pub problem: FactorizationProblem,
}

impl GradientSystem for FactorizationSystem {
    fn dim(&self) -> usize {
        8
    }
    fn step(&self, x: &mut [f64], eta: f64) {
        let (w1, w2) = from_vec8(x);
        let (g1, g2) = gradient(&self.problem, &w1, &w2);
        let g = to_vec8(&g1, &g2);
        for (xi, gi) in x.iter_mut().zip(g.iter()) {
            *xi -= eta * gi;
        }
    }
    /// `|W2 W1 - Y| / sqrt(mu_min)` with `mu_min` the smallest eigenvalue
    /// of `Dg Dg^T`.
    fn distance_to_minimisers(&self, x: &[f64]) -> f64 {
        let (w1, w2) = from_vec8(x);
        let r = (w2 * w1 - self.problem.y).norm();
        let gn = gauss_newton_operator(&w1, &w2);
        let mu = gn.symmetric_eigenvalues().min();
        if mu > 0.0 {
            r / mu.sqrt()
        } else {
            f64::INFINITY
        }
    }
    fn sharpness(&self, x: &[f64]) -> f64 {
        let (w1, w2) = from_vec8(x);
        lambda1(&w1, &w2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanParams {
    pub eta_min: f64,
    pub eta_max: f64,
    pub eta_steps: usize,
    pub delta: f64,
    pub n_steps: usize,
    pub burn_in: usize,
}

impl ScanParams {
    pub fn validate(&self) -> Result<(), EosError> {
        let bad = |m: &str| Err(EosError::InvalidInput(m.into()));
        if !(self.eta_min > 0.0 && self.eta_max > self.eta_min && self.eta_max.is_finite()) {
            return bad("step-size range must satisfy 0 < eta_min < eta_max");
        }
        if self.eta_steps < 2 {
            return bad("need at least two step sizes");
        }
        if !(self.delta > 0.0 && self.delta <= 1e-2) {
            return bad("perturbation must lie in (0, 1e-2]");
        }
        if self.burn_in >= self.n_steps {
            return bad("burn-in must be shorter than the run");
        }
        Ok(())
    }

    pub fn etas(&self) -> Vec<f64> {
        let h = (self.eta_max - self.eta_min) / (self.eta_steps - 1) as f64;
        (0..self.eta_steps).map(|i| self.eta_min + i as f64 * h).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryOutcome {
    pub class: TrajectoryClass,
    /// Half the peak-to-peak range of the coordinate along the perturbation
    /// direction over the last cycle window.
    pub amplitude: f64,
    /// Sharpness at the final iterate.
    pub sharpness: f64,
}

/// Runs gradient descent from `base + delta * dir` and classifies the tail.
pub fn classify_trajectory<S: GradientSystem + ?Sized>(
    sys: &S,
    base: &[f64],
    dir: &[f64],
    eta: f64,
    params: &ScanParams,
    th: &ClassifierThresholds,
) -> TrajectoryOutcome {
    let mut x: Vec<f64> = base.iter().zip(dir).map(|(b, d)| b + params.delta * d).collect();
    let window = 2 * th.max_period + 1;
    let mut tail: VecDeque<Vec<f64>> = VecDeque::with_capacity(window);
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    for t in 0..params.n_steps {
        sys.step(&mut x, eta);
        if !x.iter().all(|v| v.is_finite()) || norm(&x) > th.escape {
            return TrajectoryOutcome {
                class: TrajectoryClass::Escaped,
                amplitude: f64::INFINITY,
                sharpness: f64::NAN,
            };
        }
        if t + window >= params.n_steps && t >= params.burn_in {
            tail.push_back(x.clone());
        }
    }
    let coord = |v: &[f64]| -> f64 { v.iter().zip(base).zip(dir).map(|((a, b), d)| (a - b) * d).sum() };
    let (lo, hi) = tail
        .iter()
        .map(|v| coord(v))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), c| (l.min(c), h.max(c)));
    let amplitude = if tail.is_empty() { 0.0 } else { 0.5 * (hi - lo) };
    let sharpness = sys.sharpness(&x);

    if sys.distance_to_minimisers(&x) <= th.converged {
        let s0 = sys.sharpness(base);
        let drift = (sharpness - s0).abs() / s0.abs().max(f64::MIN_POSITIVE);
        let class = if drift > th.sharpness_factor * params.delta * params.delta {
            TrajectoryClass::SharpnessAdapted
        } else {
            TrajectoryClass::Converged
        };
        return TrajectoryOutcome {
            class,
            amplitude,
            sharpness,
        };
    }
    let n = tail.len();
    for k in 1..=th.max_period {
        if n < 2 * k {
            break;
        }
        let resid = (n - k..n)
            .map(|i| {
                let a = &tail[i];
                let b = &tail[i - k];
                let d: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
                d / norm(b).max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max);
        if resid <= th.cycle {
            let class = match k {
                // a fixed point off the minimiser set
                1 => TrajectoryClass::Unresolved,
                2 => TrajectoryClass::Period2,
                _ => TrajectoryClass::Periodic(k),
            };
            return TrajectoryOutcome {
                class,
                amplitude,
                sharpness,
            };
        }
    }
    TrajectoryOutcome {
        class: TrajectoryClass::Unresolved,
        amplitude,
        sharpness,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub eta: f64,
    pub class: TrajectoryClass,
    pub amplitude: f64,
    pub lambda1: f64,
    pub eta_critical: f64,
}

/// Classifies a trajectory for every step size of the grid; rows come back
/// in grid order.
pub fn scan_system<S: GradientSystem>(
    sys: &S,
    base: &[f64],
    dir: &[f64],
    params: &ScanParams,
    th: &ClassifierThresholds,
) -> Result<Vec<ScanRow>, EosError> {
    params.validate()?;
    let eta_critical = 2.0 / sys.sharpness(base);
    Ok(params
        .etas()
        .par_iter()
        .map(|&eta| {
            let o = classify_trajectory(sys, base, dir, eta, params, th);
            ScanRow {
                eta,
                class: o.class,
                amplitude: o.amplitude,
                lambda1: o.sharpness,
                eta_critical,
            }
        })
        .collect())
}

/// Checks that `(W1, W2)` is an admissible scan base and returns the
/// system, base vector and top Hessian eigendirection.
pub fn factorization_base(
    problem: &FactorizationProblem,
    w1: &Matrix2<f64>,
    w2: &Matrix2<f64>,
) -> Result<(FactorizationSystem, Vec<f64>, Vec<f64>), EosError> {
    let l = loss(problem, w1, w2);
    if !(l <= MINIMISER_LOSS) {
        return Err(EosError::BadBasePoint(format!("loss {l:e} is not at a minimiser")));
    }
    let gap = bad_set_gap(w1, w2);
    if gap.is_member {
        return Err(EosError::BadBasePoint(format!(
            "base lies on the bad set (gap {:e})",
            gap.min()
        )));
    }
    let h = super::problem::hessian(problem, w1, w2);
    let (e, _) = sym_eigen_desc(&nalgebra::DMatrix::from_column_slice(8, 8, h.as_slice()));
    if e[0] - e[1] <= crate::tolerances::SPECTRAL_GAP * e[0] {
        return Err(EosError::BadBasePoint("top Hessian eigenvalue is not simple".into()));
    }
    let dir = top_direction(problem, w1, w2);
    Ok((
        FactorizationSystem {
            problem: problem.clone(),
        },
        to_vec8(w1, w2).as_slice().to_vec(),
        dir.as_slice().to_vec(),
    ))
}

pub fn bifurcation_scan(
    problem: &FactorizationProblem,
    w1: &Matrix2<f64>,
    w2: &Matrix2<f64>,
    params: &ScanParams,
    th: &ClassifierThresholds,
) -> Result<Vec<ScanRow>, EosError> {
    let (sys, base, dir) = factorization_base(problem, w1, w2)?;
    scan_system(&sys, &base, &dir, params, th)
}

/// The scalar analogue `x -> (1 - eta) x` started at `delta`.
pub fn scalar_scan(params: &ScanParams, th: &ClassifierThresholds) -> Result<Vec<ScanRow>, EosError> {
    scan_system(&ScalarQuadratic, &[0.0], &[1.0], params, th)
}

/// First step size of a scan whose class is not `Converged`.
pub fn first_departure(rows: &[ScanRow]) -> Option<f64> {
    rows.iter()
        .find(|r| r.class != TrajectoryClass::Converged)
        .map(|r| r.eta)
}

/// Bisection for the step size at which trajectories stop converging.
/// `lo` must converge and `hi` must not; returns the bracket midpoint.
#[allow(clippy::too_many_arguments)]
pub fn locate_transition<S: GradientSystem>(
    sys: &S,
    base: &[f64],
    dir: &[f64],
    lo: f64,
    hi: f64,
    tol: f64,
    params: &ScanParams,
    th: &ClassifierThresholds,
) -> Result<f64, EosError> {
    let converges = |eta: f64| classify_trajectory(sys, base, dir, eta, params, th).class == TrajectoryClass::Converged;
    let (mut lo, mut hi) = (lo, hi);
    if !converges(lo) || converges(hi) {
        return Err(EosError::InvalidInput(format!(
            "bracket [{lo}, {hi}] does not straddle the convergence boundary"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if converges(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn write_scan_csv<W: Write>(rows: &[ScanRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "eta,class,amplitude,lambda1,eta_critical")?;
    for r in rows {
        writeln!(
            w,
            "{:.16e},{},{:.16e},{:.16e},{:.16e}",
            r.eta, r.class, r.amplitude, r.lambda1, r.eta_critical
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_params() -> ScanParams {
        ScanParams {
            eta_min: 1.5,
            eta_max: 2.5,
            eta_steps: 65,
            delta: 1e-3,
            n_steps: 20_000,
            burn_in: 10_000,
        }
    }

    #[test]
    fn scalar_flips_at_two() {
        let th = ClassifierThresholds::default();
        let rows = scalar_scan(&scalar_params(), &th).unwrap();
        for r in &rows {
            let want = if r.eta < 2.0 {
                TrajectoryClass::Converged
            } else if r.eta == 2.0 {
                TrajectoryClass::Period2
            } else {
                TrajectoryClass::Escaped
            };
            assert_eq!(r.class, want, "eta {}", r.eta);
        }
        assert_eq!(first_departure(&rows), Some(2.0));
    }

    #[test]
    fn class_names() {
        assert_eq!(TrajectoryClass::Periodic(4).to_string(), "PERIODIC_4");
        assert_eq!(TrajectoryClass::SharpnessAdapted.to_string(), "SHARPNESS_ADAPTED");
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = scalar_params();
        p.delta = 0.5;
        assert!(p.validate().is_err());
        let mut p = scalar_params();
        p.burn_in = p.n_steps;
        assert!(p.validate().is_err());
    }

    #[test]
    fn rejects_bad_base() {
        let p = FactorizationProblem::from_rows([[2.0, 0.0], [0.0, 1.0]]).unwrap();
        let params = scalar_params();
        let th = ClassifierThresholds::default();
        let r = bifurcation_scan(&p, &Matrix2::identity(), &p.y, &params, &th);
        assert!(matches!(r, Err(EosError::BadBasePoint(_))));
        let r = bifurcation_scan(&p, &Matrix2::zeros(), &p.y, &params, &th);
        assert!(matches!(r, Err(EosError::BadBasePoint(_))));
    }

    #[test]
    fn csv_layout() {
        let rows = vec![ScanRow {
            eta: 0.25,
            class: TrajectoryClass::Period2,
            amplitude: 0.0,
            lambda1: 8.0,
            eta_critical: 0.25,
        }];
        let mut buf = Vec::new();
        write_scan_csv(&rows, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(
            s,
            "eta,class,amplitude,lambda1,eta_critical\n2.5000000000000000e-1,PERIOD2,0.0000000000000000e0,8.0000000000000000e0,2.5000000000000000e-1\n"
        );
    }
}
