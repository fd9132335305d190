use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use super::TransformError;
use crate::linalg::op_norm;
use crate::manifold::{FibreRanks, ManifoldModel};

/// Base axis of a section grid.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseAxis {
    /// `n` nodes `lo + i period / n`, wrapping around.
    Periodic { lo: f64, period: f64, n: usize },
    /// `n` nodes from `lo` to `hi` inclusive.
    Interval { lo: f64, hi: f64, n: usize },
}

impl BaseAxis {
    pub fn for_model(model: &ManifoldModel, n: usize) -> Self {
        let (lo, hi) = model.param_range();
        if model.is_periodic() {
            BaseAxis::Periodic { lo, period: hi - lo, n }
        } else {
            BaseAxis::Interval { lo, hi, n }
        }
    }

    pub fn len(&self) -> usize {
        match *self {
            BaseAxis::Periodic { n, .. } | BaseAxis::Interval { n, .. } => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> f64 {
        match *self {
            BaseAxis::Periodic { period, n, .. } => period / n as f64,
            BaseAxis::Interval { lo, hi, n } => (hi - lo) / (n - 1) as f64,
        }
    }

    pub fn node(&self, i: usize) -> f64 {
        match *self {
            BaseAxis::Periodic { lo, .. } | BaseAxis::Interval { lo, .. } => lo + i as f64 * self.spacing(),
        }
    }

    /// Grid with every interval halved.
    pub fn refined(&self) -> Self {
        match *self {
            BaseAxis::Periodic { lo, period, n } => BaseAxis::Periodic { lo, period, n: 2 * n },
            BaseAxis::Interval { lo, hi, n } => BaseAxis::Interval { lo, hi, n: 2 * n - 1 },
        }
    }

    /// Lower node index and weight of the upper node; clamps interval axes.
    fn locate(&self, x: f64) -> (usize, usize, f64) {
        let h = self.spacing();
        match *self {
            BaseAxis::Periodic { lo, n, .. } => {
                let mut t = ((x - lo) / h).rem_euclid(n as f64);
                let rt = t.round();
                if (t - rt).abs() < 1e-9 {
                    t = rt;
                }
                let mut i0 = t.floor() as usize;
                let mut w = t - i0 as f64;
                if i0 >= n {
                    i0 = 0;
                    w = 0.0;
                }
                (i0, (i0 + 1) % n, w)
            }
            BaseAxis::Interval { lo, n, .. } => {
                let mut t = ((x - lo) / h).clamp(0.0, (n - 1) as f64);
                let rt = t.round();
                if (t - rt).abs() < 1e-9 {
                    t = rt;
                }
                let i0 = (t.floor() as usize).min(n - 2);
                (i0, i0 + 1, t - i0 as f64)
            }
        }
    }

    fn contains(&self, x: f64) -> bool {
        match *self {
            BaseAxis::Periodic { .. } => x.is_finite(),
            BaseAxis::Interval { lo, hi, .. } => {
                let tol = 1e-9 * (hi - lo);
                x >= lo - tol && x <= hi + tol
            }
        }
    }
}

/// Tensor grid over `base x [-4r, 4r]^d`, with `d = n_u + n_c` and `p = n_s`
/// values per node. Node index is row-major with the base axis slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionGrid {
    pub base: BaseAxis,
    pub fibre_nodes: usize,
    pub half_width: f64,
    pub d: usize,
    pub p: usize,
}

impl SectionGrid {
    pub fn new(
        base: BaseAxis,
        fibre_nodes: usize,
        half_width: f64,
        d: usize,
        p: usize,
    ) -> Result<Self, TransformError> {
        if base.len() < 4 || (d > 0 && fibre_nodes < 4) {
            return Err(TransformError::InvalidConfig(
                "grid resolution must be at least 4 per axis".into(),
            ));
        }
        if d > 0 && fibre_nodes.is_multiple_of(2) {
            return Err(TransformError::InvalidConfig(
                "fibre node count must be odd so the zero section lies on the grid".into(),
            ));
        }
        if !(half_width > 0.0) {
            return Err(TransformError::InvalidConfig("fibre box must be nonempty".into()));
        }
        Ok(SectionGrid {
            base,
            fibre_nodes: if d == 0 { 1 } else { fibre_nodes },
            half_width,
            d,
            p,
        })
    }

    pub fn fibre_spacing(&self) -> f64 {
        2.0 * self.half_width / (self.fibre_nodes - 1).max(1) as f64
    }

    pub fn fibre_coord(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.fibre_spacing()
    }

    pub fn nodes_per_fibre(&self) -> usize {
        self.fibre_nodes.pow(self.d as u32)
    }

    pub fn len(&self) -> usize {
        self.base.len() * self.nodes_per_fibre()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Multi-index `(base, fibre_0, ..., fibre_{d-1})` of a flat node index.
    pub fn multi_index(&self, idx: usize) -> Vec<usize> {
        let mut out = vec![0; 1 + self.d];
        let mut rest = idx;
        for a in (1..=self.d).rev() {
            out[a] = rest % self.fibre_nodes;
            rest /= self.fibre_nodes;
        }
        out[0] = rest;
        out
    }

    pub fn flat_index(&self, mi: &[usize]) -> usize {
        let mut idx = mi[0];
        for &j in &mi[1..] {
            idx = idx * self.fibre_nodes + j;
        }
        idx
    }

    /// Coordinates `(x, q)` of a node.
    pub fn node(&self, idx: usize) -> (f64, Vec<f64>) {
        let mi = self.multi_index(idx);
        let q = mi[1..].iter().map(|&j| self.fibre_coord(j)).collect();
        (self.base.node(mi[0]), q)
    }

    /// Grid with every axis interval halved.
    pub fn refined(&self) -> Self {
        SectionGrid {
            base: self.base.refined(),
            fibre_nodes: if self.d == 0 { 1 } else { 2 * self.fibre_nodes - 1 },
            ..self.clone()
        }
    }

    pub fn axes(&self) -> Vec<Vec<f64>> {
        let mut axes = vec![(0..self.base.len()).map(|i| self.base.node(i)).collect()];
        for _ in 0..self.d {
            axes.push((0..self.fibre_nodes).map(|j| self.fibre_coord(j)).collect());
        }
        axes
    }
}

/// A section `sigma: E_cu(4r) -> R^p` sampled on a tensor grid and extended
/// by multilinear interpolation. Outside the closed ball the section is
/// `sigma` composed with the radial projection onto the ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub grid: SectionGrid,
    pub values: Vec<f64>,
    pub r: f64,
    pub ranks: FibreRanks,
}

const MAX_CU: usize = 12;

impl Section {
    pub fn zero(grid: SectionGrid, r: f64, ranks: FibreRanks) -> Self {
        let n = grid.len() * grid.p;
        Section {
            grid,
            values: vec![0.0; n],
            r,
            ranks,
        }
    }

    /// Samples `f` at every node (with the fibre coordinate clamped to the ball).
    pub fn from_fn<F>(grid: SectionGrid, r: f64, ranks: FibreRanks, f: F) -> Self
    where
        F: Fn(f64, &[f64]) -> Vec<f64>,
    {
        let mut s = Section::zero(grid, r, ranks);
        let p = s.grid.p;
        for idx in 0..s.grid.len() {
            let (x, mut q) = s.grid.node(idx);
            clamp_to_ball(&mut q, s.grid.half_width);
            let v = f(x, &q);
            s.values[idx * p..(idx + 1) * p].copy_from_slice(&v[..p]);
        }
        s
    }

    pub fn node_value(&self, idx: usize) -> &[f64] {
        &self.values[idx * self.grid.p..(idx + 1) * self.grid.p]
    }

    /// Interpolated value; errors when `q` leaves the bounding box.
    pub fn evaluate(&self, x: f64, q: &[f64]) -> Result<Vec<f64>, TransformError> {
        let hw = self.grid.half_width;
        if q.len() != self.grid.d {
            return Err(TransformError::DimensionMismatch {
                expected: self.grid.d,
                got: q.len(),
            });
        }
        if q.iter().any(|a| !(a.abs() <= hw * (1.0 + 1e-12))) || !self.grid.base.contains(x) {
            return Err(TransformError::OutsideBox);
        }
        let mut out = vec![0.0; self.grid.p];
        self.evaluate_clamped(x, q, &mut out);
        Ok(out)
    }

    /// Interpolated value of `sigma o P` at any point, clamping the base to
    /// the parameter interval and the fibre radially to the ball.
    pub fn evaluate_clamped(&self, x: f64, q: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let d = g.d;
        assert!(d <= MAX_CU, "centre-unstable dimension above {MAX_CU}");
        let mut qc = [0.0; MAX_CU];
        qc[..d].copy_from_slice(q);
        let n2: f64 = qc[..d].iter().map(|a| a * a).sum();
        let hw = g.half_width;
        if n2 > hw * hw {
            let s = hw / n2.sqrt();
            qc[..d].iter_mut().for_each(|a| *a *= s);
        }
        let (b0, b1, bw) = g.base.locate(x);
        let mut lo = [0usize; MAX_CU];
        let mut w = [0.0; MAX_CU];
        let h = g.fibre_spacing();
        let nf = g.fibre_nodes;
        for a in 0..d {
            let mut t = ((qc[a] + hw) / h).clamp(0.0, (nf - 1) as f64);
            let rt = t.round();
            if (t - rt).abs() < 1e-9 {
                t = rt;
            }
            let i0 = (t.floor() as usize).min(nf - 2);
            lo[a] = i0;
            w[a] = t - i0 as f64;
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        let p = g.p;
        let per = g.nodes_per_fibre();
        for corner in 0..(1usize << (d + 1)) {
            let (bi, mut weight) = if corner & 1 == 0 { (b0, 1.0 - bw) } else { (b1, bw) };
            if weight == 0.0 {
                continue;
            }
            let mut fidx = 0;
            for a in 0..d {
                let up = (corner >> (a + 1)) & 1 == 1;
                let wa = if up { w[a] } else { 1.0 - w[a] };
                weight *= wa;
                fidx = fidx * nf + lo[a] + up as usize;
            }
            if weight == 0.0 {
                continue;
            }
            let base = (bi * per + fidx) * p;
            for (o, v) in out.iter_mut().zip(&self.values[base..base + p]) {
                *o += weight * v;
            }
        }
    }

    /// `sup |self - other|` over nodes.
    pub fn sup_distance(&self, other: &Section) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    /// Largest value over the base nodes of the zero section.
    pub fn zero_section_residual(&self) -> f64 {
        if self.grid.d == 0 {
            return self.sup_norm();
        }
        let mid = (self.grid.fibre_nodes - 1) / 2;
        let mut mi = vec![mid; 1 + self.grid.d];
        let mut out: f64 = 0.0;
        for i in 0..self.grid.base.len() {
            mi[0] = i;
            let idx = self.grid.flat_index(&mi);
            for v in self.node_value(idx) {
                out = out.max(v.abs());
            }
        }
        out
    }

    fn neighbour(&self, mi: &[usize], axis: usize, forward: bool) -> Option<Vec<usize>> {
        let mut m = mi.to_vec();
        if axis == 0 {
            let n = self.grid.base.len();
            match self.grid.base {
                BaseAxis::Periodic { .. } => {
                    m[0] = if forward { (mi[0] + 1) % n } else { (mi[0] + n - 1) % n };
                }
                BaseAxis::Interval { .. } => {
                    if forward {
                        if mi[0] + 1 >= n {
                            return None;
                        }
                        m[0] += 1;
                    } else {
                        if mi[0] == 0 {
                            return None;
                        }
                        m[0] -= 1;
                    }
                }
            }
        } else if forward {
            if mi[axis] + 1 >= self.grid.fibre_nodes {
                return None;
            }
            m[axis] += 1;
        } else {
            if mi[axis] == 0 {
                return None;
            }
            m[axis] -= 1;
        }
        Some(m)
    }

    fn axis_step(&self, axis: usize) -> f64 {
        if axis == 0 {
            self.grid.base.spacing()
        } else {
            self.grid.fibre_spacing()
        }
    }

    fn in_ball(&self, idx: usize) -> bool {
        let (_, q) = self.grid.node(idx);
        q.iter().map(|a| a * a).sum::<f64>().sqrt() <= self.grid.half_width * (1.0 + 1e-12)
    }

    /// One-sided difference gradient (forward where possible) at a node,
    /// shape `p x (1 + d)`.
    fn difference_gradient(&self, idx: usize) -> DMatrix<f64> {
        let mi = self.grid.multi_index(idx);
        let p = self.grid.p;
        let mut g = DMatrix::zeros(p, 1 + self.grid.d);
        let here = self.node_value(idx);
        for axis in 0..=self.grid.d {
            let h = self.axis_step(axis);
            let inside = |m: Vec<usize>| self.in_ball(self.grid.flat_index(&m)).then_some(m);
            let (nb, sign) = match self.neighbour(&mi, axis, true).and_then(inside) {
                Some(m) => (m, 1.0),
                None => match self.neighbour(&mi, axis, false).and_then(inside) {
                    Some(m) => (m, -1.0),
                    None => continue,
                },
            };
            let there = self.node_value(self.grid.flat_index(&nb));
            for k in 0..p {
                g[(k, axis)] = sign * (there[k] - here[k]) / h;
            }
        }
        g
    }

    /// Grid Lipschitz estimate: largest operator norm of the node-wise
    /// difference gradient over nodes in the closed ball, with base distance
    /// measured as arc length (`base_speed` scales parameter to length).
    pub fn lipschitz_estimate(&self, base_speed: f64) -> f64 {
        let mut best: f64 = 0.0;
        for idx in 0..self.grid.len() {
            if !self.in_ball(idx) {
                continue;
            }
            let mut g = self.difference_gradient(idx);
            for k in 0..g.nrows() {
                g[(k, 0)] /= base_speed;
            }
            best = best.max(op_norm(&g));
        }
        best
    }

    /// Rescale toward the zero section when the grid estimate exceeds one.
    /// Returns the estimate before rescaling.
    pub fn project_lipschitz(&mut self, base_speed: f64) -> f64 {
        let est = self.lipschitz_estimate(base_speed);
        if est > 1.0 {
            log::info!("Lipschitz projection: estimate {est:.6e} rescaled to 1");
            let s = 1.0 / est;
            self.values.iter_mut().for_each(|v| *v *= s);
        }
        est
    }

    /// Central-difference derivative at interior nodes whose stencil lies in
    /// the closed ball. Returns `(node index, D sigma)` pairs.
    pub fn interior_derivatives(&self, base_speed: f64) -> Vec<(usize, DMatrix<f64>)> {
        let hw = self.grid.half_width;
        let hf = self.grid.fibre_spacing();
        let reach = hw - hf * (self.grid.d as f64).sqrt() - 1e-12 * hw;
        let p = self.grid.p;
        let mut out = Vec::new();
        for idx in 0..self.grid.len() {
            let (_, q) = self.grid.node(idx);
            if q.iter().map(|a| a * a).sum::<f64>().sqrt() > reach {
                continue;
            }
            let mi = self.grid.multi_index(idx);
            let mut g = DMatrix::zeros(p, 1 + self.grid.d);
            let mut ok = true;
            for axis in 0..=self.grid.d {
                let (f, b) = (self.neighbour(&mi, axis, true), self.neighbour(&mi, axis, false));
                let (Some(f), Some(b)) = (f, b) else {
                    ok = false;
                    break;
                };
                let vf = self.node_value(self.grid.flat_index(&f));
                let vb = self.node_value(self.grid.flat_index(&b));
                let mut h = 2.0 * self.axis_step(axis);
                if axis == 0 {
                    h *= base_speed;
                }
                for k in 0..p {
                    g[(k, axis)] = (vf[k] - vb[k]) / h;
                }
            }
            if ok {
                out.push((idx, g));
            }
        }
        out
    }

    /// Section dump with the grid axes and the flat value array.
    pub fn dump(&self, lipschitz_estimate: f64, residual: f64) -> SectionDump {
        SectionDump {
            r: self.r,
            ranks: [self.ranks.unstable, self.ranks.centre, self.ranks.stable],
            axes: self.grid.axes(),
            values: self.values.clone(),
            lipschitz_estimate,
            residual,
        }
    }
}

/// Serialisable section snapshot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionDump {
    pub r: f64,
    pub ranks: [usize; 3],
    pub axes: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub lipschitz_estimate: f64,
    pub residual: f64,
}

pub(crate) fn clamp_to_ball(q: &mut [f64], radius: f64) {
    let n = q.iter().map(|a| a * a).sum::<f64>().sqrt();
    if n > radius {
        let s = radius / n;
        q.iter_mut().for_each(|a| *a *= s);
    }
}

/// A smooth section vanishing on the zero section: a random linear part
/// plus a random quadratic part, modulated along the base, rescaled to
/// the requested grid Lipschitz estimate.
pub fn random_admissible_section<R: Rng>(
    grid: &SectionGrid,
    r: f64,
    ranks: FibreRanks,
    lipschitz: f64,
    base_speed: f64,
    rng: &mut R,
) -> Section {
    let d = grid.d;
    let p = grid.p;
    let lin: Vec<f64> = (0..d * p).map(|_| rng.random_range(-1.0..1.0)).collect();
    let quad: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0) / r).collect();
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let amp: f64 = rng.random_range(0.0..0.5);
    let mut s = Section::from_fn(grid.clone(), r, ranks, |x, q| {
        let q2: f64 = q.iter().map(|a| a * a).sum();
        let m = 1.0 + amp * (x + phase).sin();
        (0..p)
            .map(|k| {
                let l: f64 = (0..d).map(|a| lin[k * d + a] * q[a]).sum();
                m * (l + quad[k] * q2)
            })
            .collect()
    });
    let est = s.lipschitz_estimate(base_speed);
    if est > 0.0 {
        let scale = lipschitz / est;
        s.values.iter_mut().for_each(|v| *v *= scale);
    }
    s
}
