use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Section, TransformError};
use crate::extension::{BundleMap, ExtendedMap};
use crate::linalg::op_norm;
use crate::manifold::{BundlePoint, ManifoldModel};

/// Largest fibre-direction derivative of `sigma` on the zero section,
/// estimated with step `h`: the maximum of the central-difference operator
/// norm and every one-sided directional quotient (the latter catches kinks
/// such as `|v|` that central differences cancel).
pub fn tangency_check(sigma: &Section, h: f64) -> Result<f64, TransformError> {
    let g = &sigma.grid;
    let spacing = g.fibre_spacing();
    if h < 2.0 * spacing {
        return Err(TransformError::StepTooSmall { h, spacing });
    }
    let d = g.d;
    let p = g.p;
    let zero = vec![0.0; d];
    let mut worst: f64 = 0.0;
    let mut central = nalgebra::DMatrix::zeros(p, d);
    let mut plus = vec![0.0; p];
    let mut minus = vec![0.0; p];
    let mut at0 = vec![0.0; p];
    for i in 0..g.base.len() {
        let x = g.base.node(i);
        sigma.evaluate_clamped(x, &zero, &mut at0);
        for a in 0..d {
            let mut q = zero.clone();
            q[a] = h;
            sigma.evaluate_clamped(x, &q, &mut plus);
            q[a] = -h;
            sigma.evaluate_clamped(x, &q, &mut minus);
            let mut fwd: f64 = 0.0;
            let mut bwd: f64 = 0.0;
            for k in 0..p {
                central[(k, a)] = (plus[k] - minus[k]) / (2.0 * h);
                fwd += ((plus[k] - at0[k]) / h).powi(2);
                bwd += ((at0[k] - minus[k]) / h).powi(2);
            }
            worst = worst.max(fwd.sqrt()).max(bwd.sqrt());
        }
        worst = worst.max(op_norm(&central));
    }
    Ok(worst)
}

/// A point of the reconstructed centre-unstable manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructedPoint {
    /// Leaf label: the base parameter of the fibre the point lies over.
    pub base: f64,
    pub cu: Vec<f64>,
    pub stable: Vec<f64>,
    pub ambient: DVector<f64>,
}

/// `{ embed(q, sigma(q)) : q a grid node in E_cu(r) }`.
pub fn reconstruct_manifold(sigma: &Section, model: &ManifoldModel) -> Result<Vec<ReconstructedPoint>, TransformError> {
    let g = &sigma.grid;
    let r = sigma.r;
    let mut out = Vec::new();
    for idx in 0..g.len() {
        let (x, q) = g.node(idx);
        if q.iter().map(|a| a * a).sum::<f64>().sqrt() > r * (1.0 + 1e-12) {
            continue;
        }
        let s = sigma.node_value(idx).to_vec();
        let mut fibre = q.clone();
        fibre.extend_from_slice(&s);
        let ambient = model.embed(&BundlePoint::from_slice(x, &fibre))?;
        out.push(ReconstructedPoint {
            base: x,
            cu: q,
            stable: s,
            ambient,
        });
    }
    Ok(out)
}

/// Uniform sample in the closed `d`-ball of radius `rad`.
pub(crate) fn sample_ball<R: Rng>(rng: &mut R, d: usize, rad: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n2: f64 = v.iter().map(|a| a * a).sum();
        if n2 <= 1.0 {
            return v.into_iter().map(|a| a * rad).collect();
        }
    }
}

/// Sup over samples `w` on the graph of `sigma` over `E_cu(r/2)` of the
/// distance from `f(w)` to the graph: the image is embedded, retracted and
/// compared with `sigma` at its own centre-unstable coordinates.
pub fn invariance_residual(
    sigma: &Section,
    ext: &ExtendedMap,
    model: &ManifoldModel,
    count: usize,
    seed: u64,
) -> Result<f64, TransformError> {
    let r = sigma.r;
    let d = sigma.grid.d;
    let p = sigma.grid.p;
    let (lo, hi) = model.param_range();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = ext.inner();
    let mut worst: f64 = 0.0;
    let mut s = vec![0.0; p];
    let mut back_s = vec![0.0; p];
    for _ in 0..count {
        let x = rng.random_range(lo..hi);
        let q = sample_ball(&mut rng, d, 0.5 * r);
        sigma.evaluate_clamped(x, &q, &mut s);
        let mut fibre = q.clone();
        fibre.extend_from_slice(&s);
        let y = f.eval(&BundlePoint::from_slice(x, &fibre));
        let ambient = model.embed(&y)?;
        let back = model.retract(&ambient)?;
        let bq = &back.fibre.as_slice()[..d];
        let norm = bq.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > r * (1.0 + 1e-9) {
            return Err(TransformError::SampleEscaped { norm, limit: r });
        }
        sigma.evaluate_clamped(back.base, bq, &mut back_s);
        let dist = back.fibre.as_slice()[d..]
            .iter()
            .zip(&back_s)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(dist);
    }
    Ok(worst)
}
