use nalgebra::DMatrix;
use serde::Serialize;

use super::{Section, SolveTrace, TransformConfig, TransformError};
use crate::linalg::op_norm;

/// Derivative estimates of one iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepDiagnostics {
    pub sweep: usize,
    pub residual: f64,
    /// Grid Lipschitz estimate of the section.
    pub lip_d0: f64,
    /// `sup |D sigma|_op` over interior nodes.
    pub sup_d1: f64,
    /// Grid Lipschitz estimate of `D sigma` over interior nodes.
    pub lip_d1: f64,
}

pub(crate) fn sweep_diagnostics(
    s: &Section,
    base_speed: f64,
    sweep: usize,
    residual: f64,
    lip_d0: f64,
) -> SweepDiagnostics {
    let ders = s.interior_derivatives(base_speed);
    let mut slot: Vec<Option<usize>> = vec![None; s.grid.len()];
    for (k, (idx, _)) in ders.iter().enumerate() {
        slot[*idx] = Some(k);
    }
    let mut sup_d1: f64 = 0.0;
    let mut lip_d1: f64 = 0.0;
    let n_base = s.grid.base.len();
    let periodic = matches!(s.grid.base, super::BaseAxis::Periodic { .. });
    for (idx, dm) in &ders {
        sup_d1 = sup_d1.max(op_norm(dm));
        let mi = s.grid.multi_index(*idx);
        for axis in 0..=s.grid.d {
            let mut nb = mi.clone();
            if axis == 0 {
                if mi[0] + 1 < n_base {
                    nb[0] += 1;
                } else if periodic {
                    nb[0] = 0;
                } else {
                    continue;
                }
            } else {
                nb[axis] += 1;
                if nb[axis] >= s.grid.fibre_nodes {
                    continue;
                }
            }
            let Some(k) = slot[s.grid.flat_index(&nb)] else {
                continue;
            };
            let other: &DMatrix<f64> = &ders[k].1;
            let dist = if axis == 0 {
                s.grid.base.spacing() * base_speed
            } else {
                s.grid.fibre_spacing()
            };
            lip_d1 = lip_d1.max(op_norm(&(dm - other)) / dist);
        }
    }
    SweepDiagnostics {
        sweep,
        residual,
        lip_d0,
        sup_d1,
        lip_d1,
    }
}

/// Checks on the per-sweep derivative history of a solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeReport {
    pub sweeps: Vec<SweepDiagnostics>,
    pub sup_d1_max: f64,
    /// `sup |D sigma_n| <= 1 + slack` for every sweep.
    pub sup_d1_bounded: bool,
    /// Affine fit `Lip(D sigma_{n+1}) ~ slope Lip(D sigma_n) + intercept`.
    pub slope: f64,
    pub intercept: f64,
    pub pairs_used: usize,
    pub rho2: f64,
    /// `intercept / (1 - rho2)`.
    pub b2: f64,
    /// Tail of `Lip(D sigma_n)` below `b2`.
    pub lip_d1_bounded: bool,
}

pub const DERIVATIVE_SLACK: f64 = 0.05;

/// Regression over consecutive sweeps whose `Lip(D sigma)` still moves by
/// more than a relative `1e-9`; converged tails carry no slope information.
pub fn derivative_bound_trace(trace: &SolveTrace, cfg: &TransformConfig) -> Result<DerivativeReport, TransformError> {
    let diag = &trace.diagnostics;
    if diag.is_empty() {
        return Err(TransformError::HistoryMissing);
    }
    let sup_d1_max = diag.iter().fold(0.0f64, |m, d| m.max(d.sup_d1));
    let last = diag.last().map(|d| d.lip_d1).unwrap_or(0.0);
    let pairs: Vec<(f64, f64)> = diag
        .windows(2)
        .map(|w| (w[0].lip_d1, w[1].lip_d1))
        .filter(|(a, b)| (b - a).abs() > 1e-9 * (1.0 + last.abs()))
        .collect();
    let (slope, intercept) = if pairs.len() >= 2 {
        let n = pairs.len() as f64;
        let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx > 0.0 {
            let s = sxy / sxx;
            (s, my - s * mx)
        } else {
            (0.0, my)
        }
    } else {
        (0.0, last)
    };
    let rho2 = cfg.rho2();
    let b2 = intercept.max(0.0) / (1.0 - rho2);
    let tail_start = diag.len() / 2;
    let lip_d1_bounded = diag[tail_start..]
        .iter()
        .all(|d| d.lip_d1 <= b2 * (1.0 + DERIVATIVE_SLACK) + 1e-12);
    Ok(DerivativeReport {
        sweeps: diag.clone(),
        sup_d1_max,
        sup_d1_bounded: sup_d1_max <= 1.0 + DERIVATIVE_SLACK,
        slope,
        intercept,
        pairs_used: pairs.len(),
        rho2,
        b2,
        lip_d1_bounded,
    })
}
