use serde::Serialize;

use super::SurgeryError;
use crate::manifold::{Geometry, ManifoldModel};

/// End of a curve with boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum End {
    Lower,
    Upper,
}

impl End {
    pub const BOTH: [End; 2] = [End::Lower, End::Upper];
}

/// Bi-collar around the boundary of `S'` for a curve `S = [lo, hi]`:
/// `S' = [lo - R, hi + R]`, `S'' = [lo - 2R, hi + 2R]`, and
/// `psi(end, t)` runs at unit speed from `dS'` (t = 0) into `S` (t = R) and
/// out to `dS''` (t = -R).
#[derive(Debug, Clone)]
pub struct CollarSpec {
    pub s: (f64, f64),
    pub depth: f64,
    pub s_prime: (f64, f64),
    pub s_double: (f64, f64),
    /// Shrunken tube radius, `0 < r <= min(r_{S''}, R)`.
    pub r: f64,
    pub model_s: ManifoldModel,
    pub model_s_prime: ManifoldModel,
    pub model_s_double: ManifoldModel,
}

impl CollarSpec {
    /// Boundary parameter of `S'` at `end`.
    pub fn boundary(&self, end: End) -> f64 {
        match end {
            End::Lower => self.s_prime.0,
            End::Upper => self.s_prime.1,
        }
    }

    pub fn psi(&self, end: End, t: f64) -> f64 {
        match end {
            End::Lower => self.s_prime.0 + t,
            End::Upper => self.s_prime.1 - t,
        }
    }

    /// Inward collar coordinate of `x` from the nearer end of `S'`, if `x`
    /// lies in the bi-collar `|t| <= R`.
    pub fn collar_coord(&self, x: f64) -> Option<(End, f64)> {
        let tl = x - self.s_prime.0;
        let tu = self.s_prime.1 - x;
        let (end, t) = if tl.abs() <= tu.abs() {
            (End::Lower, tl)
        } else {
            (End::Upper, tu)
        };
        (t.abs() <= self.depth).then_some((end, t))
    }

    pub fn with_radius(&self, r: f64) -> Result<CollarSpec, SurgeryError> {
        let limit = self.model_s_double.reach().min(self.depth);
        if !(r > 0.0 && r <= limit) {
            return Err(SurgeryError::InvalidInput(format!(
                "tube radius {r} must lie in (0, {limit}]"
            )));
        }
        Ok(CollarSpec { r, ..self.clone() })
    }
}

/// Unit-speed collar of depth `R` around an arc. `r` defaults to
/// `min(r_{S''}, R) / 2`.
pub fn build_collar(model: &ManifoldModel, depth: f64, r: Option<f64>) -> Result<CollarSpec, SurgeryError> {
    let (lo, hi) = match model.geometry() {
        Geometry::Arc { lo, hi } => (*lo, *hi),
        _ => return Err(SurgeryError::InvalidInput("collars are built on arc models".into())),
    };
    if !(depth > 0.0) || depth >= 0.5 * (hi - lo) || depth >= model.convexity_radius() {
        return Err(SurgeryError::CollarTooDeep {
            depth,
            limit: (0.5 * (hi - lo)).min(model.convexity_radius()),
        });
    }
    let s_prime = (lo - depth, hi + depth);
    let s_double = (lo - 2.0 * depth, hi + 2.0 * depth);
    let model_s_prime = model.with_interval(s_prime.0, s_prime.1)?;
    let model_s_double = model
        .with_interval(s_double.0, s_double.1)
        .map_err(|_| SurgeryError::CollarTooDeep {
            depth,
            limit: 0.25 * (std::f64::consts::TAU - (hi - lo)),
        })?;
    let spec = CollarSpec {
        s: (lo, hi),
        depth,
        s_prime,
        s_double,
        r: 0.0,
        model_s: model.clone(),
        model_s_prime,
        model_s_double,
    };
    let r = r.unwrap_or(0.5 * spec.model_s_double.reach().min(depth));
    spec.with_radius(r)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Sampled distance from `x` to a point set.
pub fn distance_to_samples(x: &[f64], set: &[Vec<f64>]) -> f64 {
    set.iter().map(|b| dist(x, b)).fold(f64::INFINITY, f64::min)
}

/// Half the sampled distance between `S` and the bad set, so that
/// `d(S, bad) >= 2r` holds at sample resolution.
pub fn compact_exclusion_radius(s_samples: &[Vec<f64>], bad_samples: &[Vec<f64>]) -> Result<f64, SurgeryError> {
    if s_samples.is_empty() || bad_samples.is_empty() {
        return Err(SurgeryError::EmptySamples);
    }
    let d = s_samples
        .iter()
        .map(|x| distance_to_samples(x, bad_samples))
        .fold(f64::INFINITY, f64::min);
    Ok(0.5 * d)
}

/// `max (|delta(x) - delta(y)| - d(x, y))` over sample pairs, where `delta`
/// is the sampled distance to the bad set. Nonpositive when `delta` is
/// 1-Lipschitz on the samples.
pub fn distance_lipschitz_excess(samples: &[Vec<f64>], bad_samples: &[Vec<f64>]) -> f64 {
    let deltas: Vec<f64> = samples.iter().map(|x| distance_to_samples(x, bad_samples)).collect();
    let mut worst = f64::NEG_INFINITY;
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let e = (deltas[i] - deltas[j]).abs() - dist(&samples[i], &samples[j]);
            worst = worst.max(e);
        }
    }
    worst
}
