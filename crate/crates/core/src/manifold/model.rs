use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ManifoldError;
use crate::linalg::{gram_schmidt, polar_orthonormal, wrap_angle};

/// Ranks of the unstable, centre and stable parts of the normal bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FibreRanks {
    pub unstable: usize,
    pub centre: usize,
    pub stable: usize,
}

impl FibreRanks {
    pub fn new(unstable: usize, centre: usize, stable: usize) -> Result<Self, ManifoldError> {
        if unstable + centre + stable == 0 {
            return Err(ManifoldError::InvalidRanks(0, 0, 0));
        }
        Ok(FibreRanks {
            unstable,
            centre,
            stable,
        })
    }

    /// Ranks from signed input, as read from configuration files.
    pub fn from_signed(u: i64, c: i64, s: i64) -> Result<Self, ManifoldError> {
        if u < 0 || c < 0 || s < 0 {
            return Err(ManifoldError::InvalidRanks(u, c, s));
        }
        FibreRanks::new(u as usize, c as usize, s as usize).map_err(|_| ManifoldError::InvalidRanks(u, c, s))
    }

    pub fn total(&self) -> usize {
        self.unstable + self.centre + self.stable
    }

    /// Dimension of E_u + E_c.
    pub fn cu(&self) -> usize {
        self.unstable + self.centre
    }
}

/// A point of the normal bundle: base parameter and fibre coordinates in
/// the model's normal frame, ordered (u | c | s).
#[derive(Debug, Clone, PartialEq)]
pub struct BundlePoint {
    pub base: f64,
    pub fibre: DVector<f64>,
}

impl BundlePoint {
    pub fn new(base: f64, fibre: DVector<f64>) -> Self {
        BundlePoint { base, fibre }
    }

    pub fn from_slice(base: f64, fibre: &[f64]) -> Self {
        BundlePoint {
            base,
            fibre: DVector::from_column_slice(fibre),
        }
    }

    pub fn zero_section(base: f64, k: usize) -> Self {
        BundlePoint {
            base,
            fibre: DVector::zeros(k),
        }
    }

    pub fn u<'a>(&'a self, ranks: &FibreRanks) -> &'a [f64] {
        &self.fibre.as_slice()[..ranks.unstable]
    }

    pub fn c<'a>(&'a self, ranks: &FibreRanks) -> &'a [f64] {
        &self.fibre.as_slice()[ranks.unstable..ranks.cu()]
    }

    pub fn s<'a>(&'a self, ranks: &FibreRanks) -> &'a [f64] {
        &self.fibre.as_slice()[ranks.cu()..]
    }

    /// Flattened `(base, fibre)` coordinates.
    pub fn to_vector(&self) -> DVector<f64> {
        let mut v = DVector::zeros(1 + self.fibre.len());
        v[0] = self.base;
        v.rows_mut(1, self.fibre.len()).copy_from(&self.fibre);
        v
    }

    pub fn from_vector(v: &DVector<f64>) -> Self {
        BundlePoint {
            base: v[0],
            fibre: v.rows(1, v.len() - 1).into_owned(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.base.is_finite() && self.fibre.iter().all(|x| x.is_finite())
    }
}

/// Parameter domain of a generic curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveDomain {
    Periodic { period: f64 },
    Interval { lo: f64, hi: f64 },
}

type CurveFn = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;
type FrameFn = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;

/// Closure-backed description of an embedded curve. `reference_normals`
/// returns `k` columns spanning (together with the velocity) the directions
/// to be used as normal frame; they are orthogonalised against the tangent.
#[derive(Clone)]
pub struct CurveSpec {
    pub ambient_dim: usize,
    pub domain: CurveDomain,
    pub point: CurveFn,
    pub velocity: CurveFn,
    pub reference_normals: FrameFn,
    pub reach: f64,
    pub convexity_radius: f64,
}

impl fmt::Debug for CurveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CurveSpec")
            .field("ambient_dim", &self.ambient_dim)
            .field("domain", &self.domain)
            .field("reach", &self.reach)
            .field("convexity_radius", &self.convexity_radius)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum Geometry {
    /// Unit circle in the first two coordinates; normal frame e_3, e_4, ...
    Circle,
    /// Sub-arc `[lo, hi]` of the unit circle.
    Arc {
        lo: f64,
        hi: f64,
    },
    Curve(CurveSpec),
}

/// A compact curve `S` in R^n together with a trivialised normal bundle
/// split as E_u + E_c + E_s.
#[derive(Debug, Clone)]
pub struct ManifoldModel {
    geometry: Geometry,
    ranks: FibreRanks,
    ambient_dim: usize,
    reach: f64,
    convexity_radius: f64,
}

const RETRACT_SAMPLES: usize = 4096;

pub fn make_circle_model(ranks: FibreRanks) -> ManifoldModel {
    ManifoldModel {
        geometry: Geometry::Circle,
        ranks,
        ambient_dim: 2 + ranks.total(),
        reach: 1.0,
        convexity_radius: FRAC_PI_2,
    }
}

pub fn make_arc_model(lo: f64, hi: f64, ranks: FibreRanks) -> Result<ManifoldModel, ManifoldError> {
    if !(lo.is_finite() && hi.is_finite()) || hi <= lo || hi - lo >= TAU {
        return Err(ManifoldError::DegenerateArc { lo, hi });
    }
    Ok(ManifoldModel {
        geometry: Geometry::Arc { lo, hi },
        ranks,
        ambient_dim: 2 + ranks.total(),
        reach: 1.0,
        convexity_radius: FRAC_PI_2,
    })
}

pub fn make_curve_model(spec: CurveSpec, ranks: FibreRanks) -> Result<ManifoldModel, ManifoldError> {
    if spec.ambient_dim < 1 + ranks.total() {
        return Err(ManifoldError::InvalidCurve(format!(
            "ambient dimension {} cannot hold a rank-{} normal frame",
            spec.ambient_dim,
            ranks.total()
        )));
    }
    if !(spec.reach > 0.0 && spec.convexity_radius > 0.0) {
        return Err(ManifoldError::InvalidCurve("radii must be positive".into()));
    }
    if let CurveDomain::Interval { lo, hi } = spec.domain {
        if hi <= lo {
            return Err(ManifoldError::DegenerateArc { lo, hi });
        }
    }
    let probe = (spec.reference_normals)(0.0);
    if probe.ncols() != ranks.total() || probe.nrows() != spec.ambient_dim {
        return Err(ManifoldError::DimensionMismatch {
            expected: ranks.total(),
            got: probe.ncols(),
        });
    }
    let ambient_dim = spec.ambient_dim;
    Ok(ManifoldModel {
        reach: spec.reach,
        convexity_radius: spec.convexity_radius,
        geometry: Geometry::Curve(spec),
        ranks,
        ambient_dim,
    })
}

impl ManifoldModel {
    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn base_dim(&self) -> usize {
        1
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn ranks(&self) -> FibreRanks {
        self.ranks
    }

    pub fn fibre_dim(&self) -> usize {
        self.ranks.total()
    }

    /// Rank of the stable part of the trivialised bundle.
    pub fn stabilised_rank(&self) -> usize {
        self.ranks.stable
    }

    pub fn reach(&self) -> f64 {
        self.reach
    }

    pub fn convexity_radius(&self) -> f64 {
        self.convexity_radius
    }

    pub fn is_periodic(&self) -> bool {
        match &self.geometry {
            Geometry::Circle => true,
            Geometry::Arc { .. } => false,
            Geometry::Curve(c) => matches!(c.domain, CurveDomain::Periodic { .. }),
        }
    }

    /// Parameter interval; for periodic models `[0, period)`.
    pub fn param_range(&self) -> (f64, f64) {
        match &self.geometry {
            Geometry::Circle => (0.0, TAU),
            Geometry::Arc { lo, hi } => (*lo, *hi),
            Geometry::Curve(c) => match c.domain {
                CurveDomain::Periodic { period } => (0.0, period),
                CurveDomain::Interval { lo, hi } => (lo, hi),
            },
        }
    }

    fn period(&self) -> Option<f64> {
        match &self.geometry {
            Geometry::Circle => Some(TAU),
            Geometry::Arc { .. } => None,
            Geometry::Curve(c) => match c.domain {
                CurveDomain::Periodic { period } => Some(period),
                CurveDomain::Interval { .. } => None,
            },
        }
    }

    /// Boundary parameters, `None` for closed curves.
    pub fn boundary(&self) -> Option<(f64, f64)> {
        if self.is_periodic() {
            None
        } else {
            Some(self.param_range())
        }
    }

    /// Distance in parameter from `x` to the boundary.
    pub fn boundary_distance(&self, x: f64) -> Option<f64> {
        self.boundary().map(|(lo, hi)| (x - lo).min(hi - x))
    }

    pub fn contains_param(&self, x: f64) -> bool {
        match self.boundary() {
            None => x.is_finite(),
            Some((lo, hi)) => x >= lo && x <= hi,
        }
    }

    /// Signed parameter difference `a - b`, wrapped for closed curves.
    pub fn base_difference(&self, a: f64, b: f64) -> f64 {
        match self.period() {
            Some(p) if (p - TAU).abs() < 1e-15 => wrap_angle(a - b),
            Some(p) => {
                let mut d = (a - b).rem_euclid(p);
                if d > 0.5 * p {
                    d -= p;
                }
                d
            }
            None => a - b,
        }
    }

    /// Canonical representative of a parameter.
    pub fn normalize_base(&self, x: f64) -> f64 {
        match self.period() {
            Some(p) => x.rem_euclid(p),
            None => x,
        }
    }

    pub fn point_of(&self, x: f64) -> DVector<f64> {
        match &self.geometry {
            Geometry::Circle | Geometry::Arc { .. } => {
                let mut p = DVector::zeros(self.ambient_dim);
                p[0] = x.cos();
                p[1] = x.sin();
                p
            }
            Geometry::Curve(c) => (c.point)(x),
        }
    }

    pub fn tangent_frame(&self, x: f64) -> DMatrix<f64> {
        match &self.geometry {
            Geometry::Circle | Geometry::Arc { .. } => {
                let mut t = DMatrix::zeros(self.ambient_dim, 1);
                t[(0, 0)] = -x.sin();
                t[(1, 0)] = x.cos();
                t
            }
            Geometry::Curve(c) => {
                let v = (c.velocity)(x);
                let n = v.norm();
                DMatrix::from_column_slice(self.ambient_dim, 1, (v / n).as_slice())
            }
        }
    }

    pub fn normal_frame(&self, x: f64) -> DMatrix<f64> {
        match &self.geometry {
            Geometry::Circle | Geometry::Arc { .. } => {
                let k = self.fibre_dim();
                DMatrix::from_fn(self.ambient_dim, k, |i, j| if i == j + 2 { 1.0 } else { 0.0 })
            }
            Geometry::Curve(c) => {
                let t = self.tangent_frame(x);
                let raw = (c.reference_normals)(x);
                let mut m = DMatrix::zeros(self.ambient_dim, 1 + raw.ncols());
                m.set_column(0, &t.column(0));
                for j in 0..raw.ncols() {
                    m.set_column(j + 1, &raw.column(j));
                }
                let q = gram_schmidt(&m).expect("reference normals must be independent of the tangent");
                q.columns(1, raw.ncols()).into_owned()
            }
        }
    }

    /// Length of the shortest path in `S` between two parameters.
    pub fn geodesic_distance(&self, x: f64, y: f64) -> f64 {
        match &self.geometry {
            Geometry::Circle => wrap_angle(y - x).abs(),
            Geometry::Arc { .. } => (y - x).abs(),
            Geometry::Curve(c) => {
                let along = arc_length(c, x, y).abs();
                match c.domain {
                    CurveDomain::Periodic { period } => {
                        let full = arc_length(c, 0.0, period);
                        let along = arc_length(c, x, x + (y - x).rem_euclid(period));
                        along.min(full - along)
                    }
                    CurveDomain::Interval { .. } => along,
                }
            }
        }
    }

    pub fn embed(&self, p: &BundlePoint) -> Result<DVector<f64>, ManifoldError> {
        if p.fibre.len() != self.fibre_dim() {
            return Err(ManifoldError::DimensionMismatch {
                expected: self.fibre_dim(),
                got: p.fibre.len(),
            });
        }
        let norm = p.fibre.norm();
        if !(norm < self.reach) {
            return Err(ManifoldError::FibreOutOfReach {
                norm,
                reach: self.reach,
            });
        }
        Ok(self.embed_unchecked(p))
    }

    /// `point_of(base) + normal_frame(base) * fibre` without the reach check.
    pub fn embed_unchecked(&self, p: &BundlePoint) -> DVector<f64> {
        match &self.geometry {
            Geometry::Circle | Geometry::Arc { .. } => {
                let mut q = DVector::zeros(self.ambient_dim);
                q[0] = p.base.cos();
                q[1] = p.base.sin();
                q.rows_mut(2, p.fibre.len()).copy_from(&p.fibre);
                q
            }
            Geometry::Curve(_) => self.point_of(p.base) + self.normal_frame(p.base) * &p.fibre,
        }
    }

    pub fn retract(&self, q: &DVector<f64>) -> Result<BundlePoint, ManifoldError> {
        if q.len() != self.ambient_dim {
            return Err(ManifoldError::DimensionMismatch {
                expected: self.ambient_dim,
                got: q.len(),
            });
        }
        match &self.geometry {
            Geometry::Circle | Geometry::Arc { .. } => self.retract_circle(q),
            Geometry::Curve(c) => self.retract_curve(c, q),
        }
    }

    fn retract_circle(&self, q: &DVector<f64>) -> Result<BundlePoint, ManifoldError> {
        let rho = q[0].hypot(q[1]);
        let rest = q.rows(2, self.ambient_dim - 2).into_owned();
        let distance = ((rho - 1.0).powi(2) + rest.norm_squared()).sqrt();
        if distance >= self.reach || rho < 1e-12 {
            return Err(ManifoldError::OutsideReach {
                distance,
                reach: self.reach,
            });
        }
        let theta = q[1].atan2(q[0]);
        let theta = match self.geometry {
            Geometry::Arc { lo, hi } => {
                // pick the representative inside the arc, if any
                let mid = 0.5 * (lo + hi);
                let t = mid + wrap_angle(theta - mid);
                if t < lo - 1e-12 || t > hi + 1e-12 {
                    return Err(ManifoldError::OutsideReach {
                        distance,
                        reach: self.reach,
                    });
                }
                t.clamp(lo, hi)
            }
            _ => theta.rem_euclid(TAU),
        };
        let residual = (rho - 1.0).abs();
        if residual > 1e-10 {
            return Err(ManifoldError::OffTube { residual });
        }
        Ok(BundlePoint::new(theta, rest))
    }

    fn retract_curve(&self, c: &CurveSpec, q: &DVector<f64>) -> Result<BundlePoint, ManifoldError> {
        let (lo, hi) = self.param_range();
        let n = RETRACT_SAMPLES;
        let periodic = self.is_periodic();
        let step = if periodic {
            (hi - lo) / n as f64
        } else {
            (hi - lo) / (n - 1) as f64
        };
        let dist: Vec<f64> = (0..n).map(|i| ((c.point)(lo + i as f64 * step) - q).norm()).collect();
        let (best, dbest) = dist
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &d)| if d < acc.1 { (i, d) } else { acc });
        if dbest >= self.reach {
            return Err(ManifoldError::OutsideReach {
                distance: dbest,
                reach: self.reach,
            });
        }
        // another well-separated sample almost as close signals a medial-axis point
        let tol = 1e-9 * (1.0 + dbest) + step * step;
        for (i, &d) in dist.iter().enumerate() {
            let sep = if periodic {
                let raw = (i as isize - best as isize).unsigned_abs();
                raw.min(n - raw)
            } else {
                (i as isize - best as isize).unsigned_abs()
            };
            if sep > 8 && d <= dbest + tol {
                return Err(ManifoldError::OutsideReach {
                    distance: dbest,
                    reach: self.reach,
                });
            }
        }
        let mut t = lo + best as f64 * step;
        let (a, b) = if periodic {
            (t - step, t + step)
        } else {
            ((t - step).max(lo), (t + step).min(hi))
        };
        t = golden_min(|s| ((c.point)(s) - q).norm_squared(), a, b);
        // polish with Newton on <x(t) - q, x'(t)> = 0
        for _ in 0..8 {
            let h = 1e-6 * step.max(1e-3);
            let g = |s: f64| ((c.point)(s) - q).dot(&(c.velocity)(s));
            let gt = g(t);
            let dg = (g(t + h) - g(t - h)) / (2.0 * h);
            if dg.abs() < 1e-14 {
                break;
            }
            let next = t - gt / dg;
            let next = if periodic { next } else { next.clamp(lo, hi) };
            if (next - t).abs() < 1e-15 * (1.0 + t.abs()) {
                t = next;
                break;
            }
            t = next;
        }
        let t = self.normalize_base(t);
        let x = (c.point)(t);
        let frame = self.normal_frame(t);
        let d = q - &x;
        let fibre = frame.transpose() * &d;
        let residual = (&d - &frame * &fibre).norm();
        let distance = d.norm();
        if distance >= self.reach {
            return Err(ManifoldError::OutsideReach {
                distance,
                reach: self.reach,
            });
        }
        if residual > 1e-8 * (1.0 + distance) {
            return Err(ManifoldError::OffTube { residual });
        }
        Ok(BundlePoint::new(t, fibre))
    }

    /// True when transport is the identity in frame coordinates.
    pub fn has_trivial_transport(&self) -> bool {
        matches!(self.geometry, Geometry::Circle | Geometry::Arc { .. })
    }

    /// Orthogonal matrix carrying fibre coordinates at `x` to fibre
    /// coordinates at `y`.
    pub fn transport(&self, x: f64, y: f64) -> Result<DMatrix<f64>, ManifoldError> {
        let distance = self.geodesic_distance(x, y);
        if distance >= self.convexity_radius {
            return Err(ManifoldError::BeyondConvexityRadius {
                x,
                y,
                distance,
                radius: self.convexity_radius,
            });
        }
        let k = self.fibre_dim();
        if self.has_trivial_transport() || x == y {
            return Ok(DMatrix::identity(k, k));
        }
        let nx = self.normal_frame(x);
        let ny = self.normal_frame(y);
        Ok(polar_orthonormal(&(ny.transpose() * nx)))
    }

    /// Arc model with the same ranks over a new parameter interval.
    pub fn with_interval(&self, lo: f64, hi: f64) -> Result<ManifoldModel, ManifoldError> {
        match &self.geometry {
            Geometry::Circle | Geometry::Arc { .. } => make_arc_model(lo, hi, self.ranks),
            Geometry::Curve(c) => {
                let mut spec = c.clone();
                spec.domain = CurveDomain::Interval { lo, hi };
                make_curve_model(spec, self.ranks)
            }
        }
    }
}

fn arc_length(c: &CurveSpec, x: f64, y: f64) -> f64 {
    // composite Simpson on |x'(t)|
    let m = 64;
    let h = (y - x) / m as f64;
    let speed = |t: f64| (c.velocity)(t).norm();
    let mut acc = speed(x) + speed(y);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * speed(x + i as f64 * h);
    }
    acc * h / 3.0
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Worst deviations of the frames from orthonormality on a parameter grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameCheck {
    pub unit_deviation: f64,
    pub cross_inner: f64,
    pub tangent_normal: f64,
}

pub fn check_frames(model: &ManifoldModel, samples: usize) -> FrameCheck {
    let (lo, hi) = model.param_range();
    let mut out = FrameCheck {
        unit_deviation: 0.0,
        cross_inner: 0.0,
        tangent_normal: 0.0,
    };
    for i in 0..samples {
        let x = if model.is_periodic() {
            lo + (hi - lo) * i as f64 / samples as f64
        } else {
            lo + (hi - lo) * i as f64 / (samples.max(2) - 1) as f64
        };
        let t = model.tangent_frame(x);
        let n = model.normal_frame(x);
        let mut all = DMatrix::zeros(model.ambient_dim(), 1 + n.ncols());
        all.set_column(0, &t.column(0));
        for j in 0..n.ncols() {
            all.set_column(j + 1, &n.column(j));
        }
        let g = all.transpose() * &all;
        for a in 0..g.nrows() {
            out.unit_deviation = out.unit_deviation.max((g[(a, a)] - 1.0).abs());
            for b in 0..g.ncols() {
                if a == b {
                    continue;
                }
                if a == 0 || b == 0 {
                    out.tangent_normal = out.tangent_normal.max(g[(a, b)].abs());
                } else {
                    out.cross_inner = out.cross_inner.max(g[(a, b)].abs());
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn ranks(u: usize, c: usize, s: usize) -> FibreRanks {
        FibreRanks::new(u, c, s).unwrap()
    }

    #[test]
    fn zero_fibre_embeds_to_curve() {
        let m = make_circle_model(ranks(1, 1, 1));
        let q = m.embed(&BundlePoint::zero_section(0.7, 3)).unwrap();
        assert_eq!(q, m.point_of(0.7));
    }

    #[test]
    fn circle_in_r3_normal_offset() {
        let m = make_circle_model(ranks(0, 0, 1));
        assert_eq!(m.ambient_dim(), 3);
        let q = m.embed(&BundlePoint::from_slice(0.0, &[0.1])).unwrap();
        assert_eq!(q.as_slice(), &[1.0, 0.0, 0.1]);
    }

    #[test]
    fn rank_two_bundle_lives_in_r4() {
        let m = make_circle_model(ranks(0, 1, 1));
        assert_eq!(m.ambient_dim(), 4);
        assert_eq!(m.normal_frame(1.0).ncols(), 2);
    }

    #[test]
    fn negative_ranks_rejected() {
        assert!(matches!(
            FibreRanks::from_signed(1, -1, 0),
            Err(ManifoldError::InvalidRanks(1, -1, 0))
        ));
    }

    #[test]
    fn fibre_beyond_reach_rejected() {
        let m = make_circle_model(ranks(0, 0, 1));
        assert!(matches!(
            m.embed(&BundlePoint::from_slice(0.0, &[1.0])),
            Err(ManifoldError::FibreOutOfReach { .. })
        ));
    }

    #[test]
    fn axis_point_is_outside_reach() {
        let m = make_circle_model(ranks(0, 0, 1));
        let q = DVector::from_vec(vec![0.0, 0.0, 1.1]);
        assert!(matches!(m.retract(&q), Err(ManifoldError::OutsideReach { .. })));
    }

    #[test]
    fn circle_round_trip() {
        let m = make_circle_model(ranks(1, 1, 1));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let theta = rng.random_range(0.0..TAU);
            let v: Vec<f64> = (0..3).map(|_| rng.random_range(-0.5..0.5)).collect();
            let p = BundlePoint::from_slice(theta, &v);
            let back = m.retract(&m.embed(&p).unwrap()).unwrap();
            assert!(m.base_difference(back.base, theta).abs() < 1e-10);
            assert!((back.fibre - &p.fibre).amax() < 1e-10);
        }
    }

    #[test]
    fn circle_frames_on_360_grid() {
        let m = make_circle_model(ranks(1, 1, 1));
        let fc = check_frames(&m, 360);
        assert!(fc.unit_deviation <= 1e-12);
        assert!(fc.cross_inner <= 1e-12);
        assert!(fc.tangent_normal <= 1e-12);
    }

    #[test]
    fn circle_transport_is_identity() {
        let m = make_circle_model(ranks(1, 0, 1));
        let p = m.transport(0.3, 0.5).unwrap();
        assert_eq!(p, DMatrix::identity(2, 2));
        assert!(matches!(
            m.transport(0.0, 2.0),
            Err(ManifoldError::BeyondConvexityRadius { .. })
        ));
    }

    #[test]
    fn arc_boundary_and_distance() {
        let m = make_arc_model(PI / 4.0, 3.0 * PI / 4.0, ranks(0, 1, 1)).unwrap();
        assert_eq!(m.boundary(), Some((PI / 4.0, 3.0 * PI / 4.0)));
        assert!((m.boundary_distance(PI / 2.0).unwrap() - PI / 4.0).abs() < 1e-15);
        let c = make_circle_model(ranks(0, 1, 1));
        for x in [0.8, 1.2, 2.0] {
            assert_eq!(m.normal_frame(x), c.normal_frame(x));
            assert_eq!(m.tangent_frame(x), c.tangent_frame(x));
            assert_eq!(m.point_of(x), c.point_of(x));
        }
    }

    #[test]
    fn degenerate_arcs_rejected() {
        let r = ranks(0, 1, 0);
        assert!(make_arc_model(1.0, 1.0, r).is_err());
        assert!(make_arc_model(0.0, TAU, r).is_err());
    }

    fn wobbly_spec() -> CurveSpec {
        let a = 0.2;
        CurveSpec {
            ambient_dim: 3,
            domain: CurveDomain::Periodic { period: TAU },
            point: Arc::new(move |t: f64| DVector::from_vec(vec![t.cos(), t.sin(), a * (2.0 * t).sin()])),
            velocity: Arc::new(move |t: f64| DVector::from_vec(vec![-t.sin(), t.cos(), 2.0 * a * (2.0 * t).cos()])),
            reference_normals: Arc::new(|t: f64| {
                DMatrix::from_column_slice(3, 2, &[t.cos(), t.sin(), 0.0, 0.0, 0.0, 1.0])
            }),
            reach: 0.3,
            convexity_radius: 1.0,
        }
    }

    #[test]
    fn generic_curve_round_trip_and_frames() {
        let m = make_curve_model(wobbly_spec(), ranks(0, 1, 1)).unwrap();
        let fc = check_frames(&m, 90);
        assert!(fc.unit_deviation < 1e-12 && fc.cross_inner < 1e-12 && fc.tangent_normal < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..40 {
            let theta = rng.random_range(0.0..TAU);
            let v = [rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)];
            let p = BundlePoint::from_slice(theta, &v);
            let back = m.retract(&m.embed(&p).unwrap()).unwrap();
            assert!(m.base_difference(back.base, theta).abs() < 1e-10);
            assert!((back.fibre - &p.fibre).amax() < 1e-10);
        }
    }

    #[test]
    fn generic_transport_is_orthogonal_and_inverse_pairs() {
        let m = make_curve_model(wobbly_spec(), ranks(0, 1, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x = rng.random_range(0.0..TAU);
            let y = x + rng.random_range(-0.3..0.3);
            let p = m.transport(x, y).unwrap();
            let q = m.transport(y, x).unwrap();
            assert!((p.transpose() * &p - DMatrix::identity(2, 2)).amax() < 1e-10);
            assert!((&q * &p - DMatrix::identity(2, 2)).amax() < 1e-10);
        }
        assert_eq!(m.transport(0.4, 0.4).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn subdivided_transport_agrees_to_second_order() {
        let m = make_curve_model(wobbly_spec(), ranks(0, 1, 1)).unwrap();
        let x = 0.3;
        let err = |d: f64| {
            let direct = m.transport(x, x + d).unwrap();
            let mut acc = DMatrix::identity(2, 2);
            for i in 0..4 {
                let a = x + d * i as f64 / 4.0;
                let b = x + d * (i + 1) as f64 / 4.0;
                acc = m.transport(a, b).unwrap() * acc;
            }
            (acc - &direct).amax()
        };
        let (e1, e2) = (err(0.4), err(0.2));
        assert!(e1 < 0.05);
        assert!(e2 <= 0.3 * e1 + 1e-14, "{e1} {e2}");
    }

    #[test]
    fn geodesic_distance_circle_wraps() {
        let m = make_circle_model(ranks(0, 0, 1));
        assert!((m.geodesic_distance(0.1, TAU - 0.1) - 0.2).abs() < 1e-12);
    }
}
