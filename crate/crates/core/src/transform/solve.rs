use log::{debug, info};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::diagnostics::{sweep_diagnostics, SweepDiagnostics};
use super::section::clamp_to_ball;
use super::{BaseAxis, Section, SectionGrid, TransformConfig, TransformError};
use crate::extension::{BundleMap, ExtendedMap};
use crate::linalg::fd_step;
use crate::manifold::{BundlePoint, ManifoldModel};
use crate::tolerances::{ARMIJO_C, ARMIJO_HALVINGS};

/// Grid for sections over the tube of `ext`, sized by `cfg`.
pub fn section_grid(model: &ManifoldModel, cfg: &TransformConfig) -> Result<SectionGrid, TransformError> {
    let ranks = model.ranks();
    SectionGrid::new(
        BaseAxis::for_model(model, cfg.base_nodes),
        cfg.fibre_nodes,
        4.0 * cfg.r,
        ranks.cu(),
        ranks.stable,
    )
}

/// Arc length per unit parameter, sampled at the start of the parameter range.
pub fn base_speed(model: &ManifoldModel) -> f64 {
    let (lo, hi) = model.param_range();
    let h = 1e-3 * (hi - lo);
    let s = model.geodesic_distance(lo, lo + h) / h;
    if s.is_finite() && s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Solution of `f^r_cu(y, sigma(y)) = target` and the full image point.
#[derive(Debug, Clone, PartialEq)]
pub struct CuInverse {
    pub base: f64,
    pub q: Vec<f64>,
    pub image: BundlePoint,
    pub iterations: usize,
}

struct Lifted<'a> {
    ext: &'a ExtendedMap,
    sigma: &'a Section,
    d: usize,
    target_base: f64,
    target_q: &'a [f64],
    interval: Option<(f64, f64)>,
}

impl Lifted<'_> {
    fn image(&self, y: &[f64]) -> BundlePoint {
        let d = self.d;
        let p = self.sigma.grid.p;
        let mut fibre = DVector::zeros(d + p);
        fibre.as_mut_slice()[..d].copy_from_slice(&y[1..]);
        self.sigma
            .evaluate_clamped(y[0], &y[1..], &mut fibre.as_mut_slice()[d..]);
        self.ext.eval(&BundlePoint::new(y[0], fibre))
    }

    fn residual_of(&self, img: &BundlePoint) -> DVector<f64> {
        let mut r = DVector::zeros(1 + self.d);
        r[0] = self.ext.model().base_difference(img.base, self.target_base);
        for a in 0..self.d {
            r[1 + a] = img.fibre[a] - self.target_q[a];
        }
        r
    }

    fn project(&self, y: &mut [f64]) {
        if let Some((lo, hi)) = self.interval {
            y[0] = y[0].clamp(lo, hi);
        }
    }

    fn jacobian(&self, y: &[f64]) -> DMatrix<f64> {
        let n = y.len();
        let h = fd_step(y.iter().map(|a| a * a).sum::<f64>().sqrt());
        let mut j = DMatrix::zeros(n, n);
        let mut yp = y.to_vec();
        for c in 0..n {
            yp[c] = y[c] + h;
            let fp = self.residual_of(&self.image(&yp));
            yp[c] = y[c] - h;
            let fm = self.residual_of(&self.image(&yp));
            yp[c] = y[c];
            j.set_column(c, &((fp - fm) / (2.0 * h)));
        }
        j
    }

    /// `A11` block of `D f^r` at the lifted point.
    fn a11(&self, y: &[f64]) -> DMatrix<f64> {
        let d = self.d;
        let p = self.sigma.grid.p;
        let mut fibre = DVector::zeros(d + p);
        fibre.as_mut_slice()[..d].copy_from_slice(&y[1..]);
        self.sigma
            .evaluate_clamped(y[0], &y[1..], &mut fibre.as_mut_slice()[d..]);
        let j = self.ext.jacobian(&BundlePoint::new(y[0], fibre));
        j.view((0, 0), (1 + d, 1 + d)).into_owned()
    }
}

/// Damped Newton on `h(y) = f^r_cu(y, sigma(y))` with a finite-difference
/// Jacobian and Armijo backtracking, falling back to `y <- y - A11^{-1} res`
/// when the line search stalls.
pub fn invert_cu(
    ext: &ExtendedMap,
    sigma: &Section,
    target_base: f64,
    target_q: &[f64],
    cfg: &TransformConfig,
) -> Result<CuInverse, TransformError> {
    let d = sigma.grid.d;
    if target_q.len() != d {
        return Err(TransformError::DimensionMismatch {
            expected: d,
            got: target_q.len(),
        });
    }
    let prob = Lifted {
        ext,
        sigma,
        d,
        target_base,
        target_q,
        interval: ext.model().boundary(),
    };
    let diverged = |res: f64| TransformError::NewtonDiverged {
        base: target_base,
        fibre: target_q.to_vec(),
        residual: res,
    };

    let mut y = vec![0.0; 1 + d];
    y[0] = target_base;
    let l = ext.normal_linearization(target_base);
    let lcu = l.view((0, 0), (d, d)).into_owned();
    let t = DVector::from_column_slice(target_q);
    match lcu.lu().solve(&t) {
        Some(s) => y[1..].copy_from_slice(s.as_slice()),
        None => y[1..].copy_from_slice(target_q),
    }
    prob.project(&mut y);

    let mut img = prob.image(&y);
    let mut res = prob.residual_of(&img);
    let mut norm = res.norm();
    let mut it = 0;
    let mut fallback = false;
    while norm > cfg.newton_tol {
        if it >= cfg.newton_max_iter || !norm.is_finite() {
            return Err(diverged(norm));
        }
        it += 1;
        let step = if fallback {
            prob.a11(&y).lu().solve(&res)
        } else {
            prob.jacobian(&y).lu().solve(&res)
        };
        let Some(step) = step else {
            if fallback {
                return Err(diverged(norm));
            }
            fallback = true;
            continue;
        };
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=ARMIJO_HALVINGS {
            let mut cand: Vec<f64> = y.iter().zip(step.iter()).map(|(a, s)| a - alpha * s).collect();
            prob.project(&mut cand);
            let ci = prob.image(&cand);
            let cr = prob.residual_of(&ci);
            let cn = cr.norm();
            if cn <= (1.0 - ARMIJO_C * alpha) * norm {
                y = cand;
                img = ci;
                res = cr;
                norm = cn;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            if fallback {
                return Err(diverged(norm));
            }
            debug!("line search stalled at residual {norm:.3e}; switching to A11 iteration");
            fallback = true;
        }
    }
    Ok(CuInverse {
        base: y[0],
        q: y[1..].to_vec(),
        image: img,
        iterations: it,
    })
}

/// One sweep of the graph transform: node values `f^r_s(y, sigma(y))` with
/// `y` the inverse image of the node, then a Lipschitz projection.
pub fn apply_graph_transform(
    ext: &ExtendedMap,
    sigma: &Section,
    cfg: &TransformConfig,
) -> Result<Section, TransformError> {
    apply_inner(ext, sigma, cfg).map(|(s, _)| s)
}

fn apply_inner(ext: &ExtendedMap, sigma: &Section, cfg: &TransformConfig) -> Result<(Section, f64), TransformError> {
    let grid = &sigma.grid;
    let d = grid.d;
    let p = grid.p;
    let hw = grid.half_width;
    let rows: Vec<Result<Vec<f64>, TransformError>> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (x, mut q) = grid.node(idx);
            clamp_to_ball(&mut q, hw);
            let inv = invert_cu(ext, sigma, x, &q, cfg)?;
            Ok(inv.image.fibre.as_slice()[d..d + p].to_vec())
        })
        .collect();
    let mut out = Section::zero(grid.clone(), sigma.r, sigma.ranks);
    for (idx, row) in rows.into_iter().enumerate() {
        out.values[idx * p..(idx + 1) * p].copy_from_slice(&row?);
    }
    let est = out.project_lipschitz(base_speed(ext.model()));
    Ok((out, est))
}

/// Per-sweep record of a Picard solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    pub residuals: Vec<f64>,
    pub diagnostics: Vec<SweepDiagnostics>,
    pub projections: usize,
}

impl SolveTrace {
    pub fn sweeps(&self) -> usize {
        self.residuals.len()
    }
}

pub fn solve_fixed_section(ext: &ExtendedMap, cfg: &TransformConfig) -> Result<(Section, SolveTrace), TransformError> {
    let grid = section_grid(ext.model(), cfg)?;
    let init = Section::zero(grid, cfg.r, ext.model().ranks());
    solve_from(ext, cfg, init)
}

/// Picard iteration from `init` until the sup-norm step is below
/// `fixed_point_tol`.
pub fn solve_from(
    ext: &ExtendedMap,
    cfg: &TransformConfig,
    init: Section,
) -> Result<(Section, SolveTrace), TransformError> {
    cfg.validate()?;
    let speed = base_speed(ext.model());
    let mut sigma = init;
    let mut trace = SolveTrace {
        residuals: Vec::new(),
        diagnostics: Vec::new(),
        projections: 0,
    };
    for sweep in 1..=cfg.max_sweeps {
        let (next, est) = apply_inner(ext, &sigma, cfg)?;
        if est > 1.0 {
            trace.projections += 1;
        }
        let res = next.sup_distance(&sigma);
        trace.residuals.push(res);
        if cfg.track_derivatives {
            trace
                .diagnostics
                .push(sweep_diagnostics(&next, speed, sweep, res, est.min(1.0)));
        }
        debug!("sweep {sweep}: residual {res:.3e}");
        sigma = next;
        if res <= cfg.fixed_point_tol {
            info!("graph transform converged after {sweep} sweeps");
            return Ok((sigma, trace));
        }
    }
    Err(TransformError::MaxSweepsExceeded {
        sweeps: cfg.max_sweeps,
        last: *trace.residuals.last().unwrap_or(&f64::NAN),
        residuals: trace.residuals,
    })
}

/// `|T s1 - T s2| / |s1 - s2|` in the sup norm over nodes.
pub fn contraction_ratio(
    ext: &ExtendedMap,
    s1: &Section,
    s2: &Section,
    cfg: &TransformConfig,
) -> Result<f64, TransformError> {
    let den = s1.sup_distance(s2);
    if den == 0.0 {
        return Err(TransformError::IdenticalSections);
    }
    let t1 = apply_graph_transform(ext, s1, cfg)?;
    let t2 = apply_graph_transform(ext, s2, cfg)?;
    Ok(t1.sup_distance(&t2) / den)
}
