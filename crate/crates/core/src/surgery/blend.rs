use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::collar::{CollarSpec, End};
use super::SurgeryError;
use crate::extension::{phi, BundleMap};
use crate::linalg::{asymmetry, sym_eigen_desc};
use crate::manifold::BundlePoint;
use crate::tolerances::{PARTITION_SUM, SPECTRAL_GAP, SYMMETRY};

/// Signed pieces of the normal splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SubBundle {
    UnstablePlus,
    UnstableMinus,
    CentrePlus,
    CentreMinus,
    Stable,
}

impl SubBundle {
    pub fn is_centre(self) -> bool {
        matches!(self, SubBundle::CentrePlus | SubBundle::CentreMinus)
    }

    /// The unsigned piece (`E_u`, `E_c` or `E_s`) containing `self`.
    fn unsigned(self) -> u8 {
        match self {
            SubBundle::UnstablePlus | SubBundle::UnstableMinus => 0,
            SubBundle::CentrePlus | SubBundle::CentreMinus => 1,
            SubBundle::Stable => 2,
        }
    }

    fn sign(self) -> f64 {
        match self {
            SubBundle::UnstableMinus | SubBundle::CentreMinus => -1.0,
            _ => 1.0,
        }
    }
}

/// Orthonormal bases of the signed pieces of a symmetric normal Jacobian.
#[derive(Debug, Clone)]
pub struct SignedSplitting {
    pub parts: Vec<(SubBundle, DMatrix<f64>)>,
    pub eigenvalues: Vec<f64>,
}

impl SignedSplitting {
    pub fn basis(&self, kind: SubBundle) -> Option<&DMatrix<f64>> {
        self.parts.iter().find(|(k, _)| *k == kind).map(|(_, b)| b)
    }

    /// Columns of all pieces with the same unsigned type as `kind`.
    fn unsigned_basis(&self, kind: SubBundle) -> DMatrix<f64> {
        let cols: Vec<DVector<f64>> = self
            .parts
            .iter()
            .filter(|(k, _)| k.unsigned() == kind.unsigned())
            .flat_map(|(_, b)| b.column_iter().map(|c| c.into_owned()).collect::<Vec<_>>())
            .collect();
        let n = self.eigenvalues.len();
        DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
    }
}

/// Splits by eigenvalue sign and modulus relative to 1, with gap `1e-6`.
pub fn signed_splitting(normal_jacobian: &DMatrix<f64>) -> Result<SignedSplitting, SurgeryError> {
    let a = asymmetry(normal_jacobian);
    if a > SYMMETRY {
        return Err(SurgeryError::NotSymmetric { asymmetry: a });
    }
    let (vals, vecs) = sym_eigen_desc(normal_jacobian);
    let kinds = [
        SubBundle::UnstablePlus,
        SubBundle::UnstableMinus,
        SubBundle::CentrePlus,
        SubBundle::CentreMinus,
        SubBundle::Stable,
    ];
    let classify = |l: f64| -> SubBundle {
        let m = l.abs();
        if m < 1.0 - SPECTRAL_GAP {
            SubBundle::Stable
        } else if m <= 1.0 + SPECTRAL_GAP {
            if l > 0.0 {
                SubBundle::CentrePlus
            } else {
                SubBundle::CentreMinus
            }
        } else if l > 0.0 {
            SubBundle::UnstablePlus
        } else {
            SubBundle::UnstableMinus
        }
    };
    let n = vals.len();
    let mut parts = Vec::new();
    for kind in kinds {
        let idx: Vec<usize> = (0..n).filter(|&i| classify(vals[i]) == kind).collect();
        if idx.is_empty() {
            continue;
        }
        parts.push((kind, DMatrix::from_fn(n, idx.len(), |i, j| vecs[(i, idx[j])])));
    }
    Ok(SignedSplitting {
        parts,
        eigenvalues: vals,
    })
}

/// A chart on one collar: an interval of the collar coordinate and a
/// constant orthonormal fibre frame whose columns carry sub-bundle labels.
#[derive(Debug, Clone)]
pub struct Chart {
    pub end: End,
    pub interval: (f64, f64),
    pub frame: DMatrix<f64>,
    pub labels: Vec<SubBundle>,
}

/// Frame test: every column lies in its labelled piece (signed, or only
/// up to `E_u | E_c | E_s` when `signed` is false).
pub fn frame_respects(chart: &Chart, split: &SignedSplitting, signed: bool) -> Result<(), SurgeryError> {
    let k = chart.frame.nrows();
    let ortho = (chart.frame.transpose() * &chart.frame - DMatrix::identity(k, k)).amax();
    if ortho > 1e-10 {
        return Err(SurgeryError::FrameNotSplitRespecting { leak: ortho });
    }
    for (j, &label) in chart.labels.iter().enumerate() {
        let basis = if signed {
            match split.basis(label) {
                Some(b) => b.clone(),
                None => return Err(SurgeryError::FrameNotSplitRespecting { leak: 1.0 }),
            }
        } else {
            split.unsigned_basis(label)
        };
        let col = chart.frame.column(j);
        let leak = (col - &basis * (basis.transpose() * col)).norm();
        if leak > 1e-10 {
            return Err(SurgeryError::FrameNotSplitRespecting { leak });
        }
    }
    Ok(())
}

/// Frame built from a splitting's own bases, one label per column.
pub fn splitting_frame(split: &SignedSplitting) -> (DMatrix<f64>, Vec<SubBundle>) {
    let n = split.eigenvalues.len();
    let mut cols = Vec::new();
    let mut labels = Vec::new();
    for (kind, b) in &split.parts {
        for c in b.column_iter() {
            cols.push(c.into_owned());
            labels.push(*kind);
        }
    }
    (DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]), labels)
}

/// `phi(|t|)` with plateau `[0, r/2]` and support `[0, r)`.
fn collar_bump(t: f64, r: f64) -> f64 {
    phi(2.0 * t.abs() / r)
}

/// The locally blended map of one chart: base components frozen to their
/// zero-fibre values near `dS'`, fibre component unchanged except that the
/// centre block takes the chart's labelled model `diag(+-1)` on the plateau.
#[derive(Clone)]
pub struct LocalBlend {
    pub chart: Chart,
    f: Arc<dyn BundleMap>,
    r: f64,
    boundary: f64,
}

impl LocalBlend {
    /// Evaluates at a point with collar coordinate `t`.
    pub fn eval_at(&self, p: &BundlePoint, t: f64) -> BundlePoint {
        let fx = self.f.eval(p);
        let b = collar_bump(p.fibre.norm(), self.r) * collar_bump(t, self.r);
        if b == 0.0 {
            return fx;
        }
        let f0 = self.f.eval(&BundlePoint::zero_section(p.base, p.fibre.len()));
        let base = (1.0 - b) * fx.base + b * f0.base;
        let q = &self.chart.frame;
        let mut local = q.transpose() * &fx.fibre;
        let centre: Vec<usize> = (0..self.chart.labels.len())
            .filter(|&j| self.chart.labels[j].is_centre())
            .collect();
        if !centre.is_empty() {
            let w = q.transpose() * &p.fibre;
            let actual = q.transpose() * self.f.normal_linearization(p.base) * q;
            for &i in &centre {
                let mut corr = self.chart.labels[i].sign() * w[i];
                for &j in &centre {
                    corr -= actual[(i, j)] * w[j];
                }
                local[i] += b * corr;
            }
        }
        BundlePoint::new(base, q * local)
    }

    pub fn boundary(&self) -> f64 {
        self.boundary
    }
}

/// Blended local map for `chart`. The frame must respect the signed
/// splitting when `require_signed` is set, and `E_u | E_c | E_s` always.
pub fn blend_local(
    f: Arc<dyn BundleMap>,
    collar: &CollarSpec,
    chart: Chart,
    require_signed: bool,
) -> Result<LocalBlend, SurgeryError> {
    let boundary = collar.boundary(chart.end);
    for t in [
        chart.interval.0,
        0.5 * (chart.interval.0 + chart.interval.1),
        chart.interval.1,
    ] {
        let x = collar.psi(chart.end, t.clamp(-collar.depth, collar.depth));
        let split = signed_splitting(&f.normal_linearization(x))?;
        frame_respects(&chart, &split, false)?;
        if require_signed {
            frame_respects(&chart, &split, true)?;
        }
    }
    Ok(LocalBlend {
        chart,
        f,
        r: collar.r,
        boundary,
    })
}

/// Smooth bump supported on an open interval, 1 at its midpoint.
fn interval_bump(t: f64, (a, b): (f64, f64)) -> f64 {
    if t <= a || t >= b {
        return 0.0;
    }
    let half = 0.5 * (b - a);
    let s = (t - a) * (b - t) / (half * half);
    (1.0 - 1.0 / s).exp()
}

/// Partition of unity over the charts of each collar: weighted interval
/// bumps normalised pointwise.
#[derive(Debug, Clone)]
pub struct Partition {
    pub intervals: Vec<(End, (f64, f64))>,
    pub weights: Vec<f64>,
}

impl Partition {
    /// `rho_alpha(t)` for the charts of `end`, in chart order; `None` where
    /// no chart of `end` covers `t`.
    pub fn weights_at(&self, end: End, t: f64) -> Option<Vec<f64>> {
        let raw: Vec<f64> = self
            .intervals
            .iter()
            .zip(&self.weights)
            .map(|((e, iv), w)| if *e == end { w * interval_bump(t, *iv) } else { 0.0 })
            .collect();
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return None;
        }
        Some(raw.into_iter().map(|v| v / total).collect())
    }

    /// Worst deviation of `sum rho` from 1 over `[-r, r]` on both collars.
    pub fn sum_gap(&self, r: f64, samples: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for end in End::BOTH {
            for i in 0..=samples {
                let t = -r + 2.0 * r * i as f64 / samples as f64;
                match self.weights_at(end, t) {
                    Some(w) => worst = worst.max((w.iter().sum::<f64>() - 1.0).abs()),
                    None => return f64::INFINITY,
                }
            }
        }
        worst
    }
}

/// `n` overlapping charts per collar with jittered intervals covering
/// `[-1.2 r, 1.2 r]` and random positive weights.
pub fn random_partition(n: usize, r: f64, seed: u64) -> Partition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = 2.4 * r;
    let step = span / n as f64;
    let mut intervals = Vec::new();
    let mut weights = Vec::new();
    for end in End::BOTH {
        for k in 0..n {
            let c = -1.2 * r + (k as f64 + 0.5) * step + rng.random_range(-0.15..0.15) * step;
            let half = step * rng.random_range(0.9..1.3);
            let lo = if k == 0 { -1.3 * r } else { c - half };
            let hi = if k + 1 == n { 1.3 * r } else { c + half };
            intervals.push((end, (lo, hi)));
            weights.push(rng.random_range(0.5..2.0));
        }
    }
    Partition { intervals, weights }
}

/// `f'`: the partition-weighted sum of local blends on the tube
/// `|t| < r, |w| < r` around `dS'`, and `f` everywhere else.
#[derive(Clone)]
pub struct PatchedMap {
    pub f: Arc<dyn BundleMap>,
    pub collar: CollarSpec,
    pub blends: Vec<LocalBlend>,
    pub partition: Partition,
}

impl PatchedMap {
    /// Whether `p` lies in the open tube where `f'` may differ from `f`.
    pub fn in_tube(&self, p: &BundlePoint) -> Option<(End, f64)> {
        let r = self.collar.r;
        if !(p.fibre.norm() < r) {
            return None;
        }
        match self.collar.collar_coord(p.base) {
            Some((end, t)) if t.abs() < r => Some((end, t)),
            _ => None,
        }
    }
}

/// Patches the local blends. Chart `alpha` of the partition belongs to
/// `blends[alpha]`.
pub fn patch_partition(
    f: Arc<dyn BundleMap>,
    collar: &CollarSpec,
    blends: Vec<LocalBlend>,
    partition: Partition,
) -> Result<PatchedMap, SurgeryError> {
    if blends.len() != partition.intervals.len() {
        return Err(SurgeryError::InvalidInput(format!(
            "{} blends for {} partition charts",
            blends.len(),
            partition.intervals.len()
        )));
    }
    for (b, (end, iv)) in blends.iter().zip(&partition.intervals) {
        if b.chart.end != *end || b.chart.interval != *iv {
            return Err(SurgeryError::InvalidInput(
                "blend charts do not match the partition".into(),
            ));
        }
    }
    let gap = partition.sum_gap(collar.r, 1000);
    if gap > PARTITION_SUM.max(1e-10) {
        return Err(SurgeryError::PartitionGap { gap });
    }
    Ok(PatchedMap {
        f,
        collar: collar.clone(),
        blends,
        partition,
    })
}

impl BundleMap for PatchedMap {
    fn fibre_dim(&self) -> usize {
        self.f.fibre_dim()
    }

    fn eval(&self, p: &BundlePoint) -> BundlePoint {
        let Some((end, t)) = self.in_tube(p) else {
            return self.f.eval(p);
        };
        let Some(rho) = self.partition.weights_at(end, t) else {
            return self.f.eval(p);
        };
        let mut base = 0.0;
        let mut fibre = DVector::zeros(p.fibre.len());
        for (blend, w) in self.blends.iter().zip(rho) {
            if w == 0.0 {
                continue;
            }
            let y = blend.eval_at(p, t);
            base += w * y.base;
            fibre += y.fibre * w;
        }
        BundlePoint::new(base, fibre)
    }

    fn domain_radius(&self) -> f64 {
        self.f.domain_radius()
    }
}

/// Rotation by `angle` in the plane of frame columns `i` and `j`.
pub fn rotate_columns(frame: &DMatrix<f64>, i: usize, j: usize, angle: f64) -> DMatrix<f64> {
    let mut out = frame.clone();
    let (c, s) = (angle.cos(), angle.sin());
    let a = frame.column(i).into_owned();
    let b = frame.column(j).into_owned();
    out.set_column(i, &(&a * c + &b * s));
    out.set_column(j, &(&b * c - &a * s));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitting_by_sign() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0, -1.0, 0.5, -3.0]));
        let s = signed_splitting(&m).unwrap();
        assert_eq!(s.parts.len(), 5);
        assert_eq!(s.basis(SubBundle::CentreMinus).unwrap().ncols(), 1);
        assert!((s.basis(SubBundle::CentreMinus).unwrap()[(2, 0)].abs() - 1.0).abs() < 1e-15);
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(
            signed_splitting(&asym),
            Err(SurgeryError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn frame_tests() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0, -1.0, 0.5]));
        let s = signed_splitting(&m).unwrap();
        let (frame, labels) = splitting_frame(&s);
        let mut chart = Chart {
            end: End::Lower,
            interval: (-0.1, 0.1),
            frame,
            labels,
        };
        assert!(frame_respects(&chart, &s, true).is_ok());
        let ic = chart.labels.iter().position(|l| *l == SubBundle::CentrePlus).unwrap();
        let jc = chart.labels.iter().position(|l| *l == SubBundle::CentreMinus).unwrap();
        chart.frame = rotate_columns(&chart.frame, ic, jc, 0.4);
        assert!(frame_respects(&chart, &s, false).is_ok());
        assert!(matches!(
            frame_respects(&chart, &s, true),
            Err(SurgeryError::FrameNotSplitRespecting { .. })
        ));
        let iu = chart.labels.iter().position(|l| *l == SubBundle::UnstablePlus).unwrap();
        chart.frame = rotate_columns(&chart.frame, iu, ic, 0.4);
        assert!(frame_respects(&chart, &s, false).is_err());
    }

    #[test]
    fn partition_sums_to_one() {
        let p = random_partition(3, 0.05, 7);
        assert!(p.sum_gap(0.05, 1000) <= 1e-12);
        let w = p.weights_at(End::Upper, 0.0).unwrap();
        assert!(w[..3].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn bump_plateau_and_support() {
        assert_eq!(collar_bump(0.02, 0.05), 1.0);
        assert_eq!(collar_bump(-0.025, 0.05), 1.0);
        assert_eq!(collar_bump(0.05, 0.05), 0.0);
        assert!(collar_bump(0.04, 0.05) > 0.0 && collar_bump(0.04, 0.05) < 1.0);
    }
}
