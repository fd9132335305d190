use nalgebra::{DVector, Matrix2};
use serde::Serialize;

use super::ClarkeError;
use crate::eos::{bad_set_gap, from_vec8, lambda1, minimiser_chart, to_vec8, FactorizationProblem, BAD_SET_GAP};

/// `lambda_1` as a scalar field on `vec(W1, W2)` in R^8.
pub fn lambda1_field(w: &DVector<f64>) -> DVector<f64> {
    let (w1, w2) = from_vec8(w.as_slice());
    DVector::from_element(1, lambda1(&w1, &w2))
}

/// Straight segment `A(s) = (1 - s) A0 + s A1` of chart matrices, mapped to
/// the minimiser manifold by `A -> (A, Y A^{-1})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimiserPath {
    pub a0: Matrix2<f64>,
    pub a1: Matrix2<f64>,
}

impl MinimiserPath {
    pub fn chart(&self, s: f64) -> Matrix2<f64> {
        self.a0 * (1.0 - s) + self.a1 * s
    }

    pub fn point(&self, problem: &FactorizationProblem, s: f64) -> Result<(Matrix2<f64>, Matrix2<f64>), ClarkeError> {
        Ok(minimiser_chart(problem, &self.chart(s))?)
    }

    fn lambda(&self, problem: &FactorizationProblem, s: f64) -> Result<f64, ClarkeError> {
        let (w1, w2) = self.point(problem, s)?;
        Ok(lambda1(&w1, &w2))
    }

    fn gap(&self, problem: &FactorizationProblem, s: f64) -> Result<f64, ClarkeError> {
        let (w1, w2) = self.point(problem, s)?;
        Ok(bad_set_gap(&w1, &w2).min())
    }
}

/// `lambda_1` along a path on a uniform grid in `s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathProfile {
    pub s: Vec<f64>,
    pub lambda1: Vec<f64>,
    pub gap: Vec<f64>,
    /// Largest `|d lambda_1| / |d(W1, W2)|_F` over consecutive nodes.
    pub lip_bound: f64,
    /// Largest `|second difference| / h^2` over the whole grid.
    pub curvature: f64,
}

impl PathProfile {
    pub fn resolution(&self) -> f64 {
        self.s[1] - self.s[0]
    }

    /// Grid node with the largest slope change.
    pub fn slope_jump_node(&self) -> (usize, f64) {
        let h = self.resolution();
        let mut best = (0, f64::NEG_INFINITY);
        for i in 1..self.s.len() - 1 {
            let jump = ((self.lambda1[i + 1] - self.lambda1[i]) - (self.lambda1[i] - self.lambda1[i - 1])).abs() / h;
            if jump > best.1 {
                best = (i, jump);
            }
        }
        best
    }

    /// `max |second difference| / h^2` over nodes at least `2h` from `s0`.
    pub fn curvature_away_from(&self, s0: f64) -> f64 {
        let h = self.resolution();
        let mut worst: f64 = 0.0;
        for i in 1..self.s.len() - 1 {
            if (self.s[i] - s0).abs() > 2.0 * h {
                let d2 = (self.lambda1[i + 1] - 2.0 * self.lambda1[i] + self.lambda1[i - 1]) / (h * h);
                worst = worst.max(d2.abs());
            }
        }
        worst
    }
}

pub fn lambda1_path_profile(
    problem: &FactorizationProblem,
    path: &MinimiserPath,
    samples: usize,
) -> Result<PathProfile, ClarkeError> {
    if samples < 5 {
        return Err(ClarkeError::InvalidInput("need at least five path samples".into()));
    }
    let n = samples - 1;
    let s: Vec<f64> = (0..samples).map(|i| i as f64 / n as f64).collect();
    let mut lam = Vec::with_capacity(samples);
    let mut gap = Vec::with_capacity(samples);
    let mut pts = Vec::with_capacity(samples);
    for &si in &s {
        let (w1, w2) = path.point(problem, si)?;
        lam.push(lambda1(&w1, &w2));
        gap.push(bad_set_gap(&w1, &w2).min());
        pts.push(to_vec8(&w1, &w2));
    }
    let mut lip_bound: f64 = 0.0;
    for i in 0..n {
        let d = (pts[i + 1] - pts[i]).norm();
        if d > 0.0 {
            lip_bound = lip_bound.max((lam[i + 1] - lam[i]).abs() / d);
        }
    }
    let h = 1.0 / n as f64;
    let curvature = (1..n)
        .map(|i| ((lam[i + 1] - 2.0 * lam[i] + lam[i - 1]) / (h * h)).abs())
        .fold(0.0, f64::max);
    Ok(PathProfile {
        s,
        lambda1: lam,
        gap,
        lip_bound,
        curvature,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lambda1Probe {
    pub resolution: f64,
    pub lip_bound: f64,
    /// Where the bad-set gap vanishes, refined by golden-section search.
    pub crossing: f64,
    pub gap_at_crossing: f64,
    /// Grid node with the largest slope change.
    pub kink_location: f64,
    /// One-sided `d lambda_1 / ds` at the crossing.
    pub left_slope: f64,
    pub right_slope: f64,
    pub slope_jump: f64,
    /// Second-difference bound on nodes more than `2h` from the kink.
    pub off_kink_curvature: f64,
}

fn golden_min<F: Fn(f64) -> Result<f64, ClarkeError>>(g: F, mut a: f64, mut b: f64) -> Result<f64, ClarkeError> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut gc, mut gd) = (g(c)?, g(d)?);
    for _ in 0..200 {
        if b - a <= 4.0 * f64::EPSILON * b.abs().max(1.0) {
            break;
        }
        if gc <= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c)?;
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d)?;
        }
    }
    Ok(if gc <= gd { c } else { d })
}

/// Locates where a minimiser path crosses the bad set and checks that
/// `lambda_1` is Lipschitz across it with a jump in slope. The endpoints
/// must be off the bad set.
pub fn lambda1_lipschitz_probe(
    problem: &FactorizationProblem,
    path: &MinimiserPath,
    samples: usize,
) -> Result<Lambda1Probe, ClarkeError> {
    let profile = lambda1_path_profile(problem, path, samples)?;
    let n = samples - 1;
    for end in [0, n] {
        if profile.gap[end] <= BAD_SET_GAP {
            return Err(ClarkeError::InvalidInput(format!(
                "path endpoint s = {} lies on the bad set",
                profile.s[end]
            )));
        }
    }
    let (imin, _) = profile.gap.iter().enumerate().fold(
        (0, f64::INFINITY),
        |best, (i, &g)| if g < best.1 { (i, g) } else { best },
    );
    let h = profile.resolution();
    let lo = profile.s[imin.saturating_sub(1)];
    let hi = profile.s[(imin + 1).min(n)];
    let crossing = golden_min(|s| path.gap(problem, s), lo, hi)?;
    let gap_at_crossing = path.gap(problem, crossing)?;
    if gap_at_crossing > BAD_SET_GAP {
        return Err(ClarkeError::NoCrossingOnPath {
            min_gap: gap_at_crossing,
        });
    }
    let (node, _) = profile.slope_jump_node();
    let step = 1e-6;
    let l0 = path.lambda(problem, crossing)?;
    let left_slope = (l0 - path.lambda(problem, crossing - step)?) / step;
    let right_slope = (path.lambda(problem, crossing + step)? - l0) / step;
    log::debug!("lambda1 probe: crossing {crossing}, slopes {left_slope} / {right_slope}");
    Ok(Lambda1Probe {
        resolution: h,
        lip_bound: profile.lip_bound,
        crossing,
        gap_at_crossing,
        kink_location: profile.s[node],
        left_slope,
        right_slope,
        slope_jump: (right_slope - left_slope).abs(),
        off_kink_curvature: profile.curvature_away_from(crossing),
    })
}
