use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{BundlePoint, FibreRanks, ManifoldError, ManifoldModel};
use crate::extension::BundleMap;

/// Diagonal spectral blocks of the benchmark map on the zero section, plus
/// the second-order terms of the unsheared block map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    /// Eigenvalues on E_u, each of modulus > 1.
    pub unstable: Vec<f64>,
    /// Eigenvalues on E_c, each +1 or -1.
    pub centre: Vec<f64>,
    /// Eigenvalues on E_s, each of modulus <= kappa.
    pub stable: Vec<f64>,
    pub kappa: f64,
    /// Base drift `gamma |v|^2` added to the base parameter.
    #[serde(default)]
    pub base_drift: f64,
    /// Stable cubic term `beta |q|^2 s`.
    #[serde(default)]
    pub stable_cubic: f64,
}

impl BlockSpec {
    pub fn ranks(&self) -> Result<FibreRanks, ManifoldError> {
        FibreRanks::new(self.unstable.len(), self.centre.len(), self.stable.len())
    }

    fn validate(&self) -> Result<(), ManifoldError> {
        if let Some(l) = self.unstable.iter().find(|l| !(l.abs() > 1.0)) {
            return Err(ManifoldError::SpectralViolation(format!(
                "unstable eigenvalue {l} has modulus <= 1"
            )));
        }
        if let Some(l) = self.centre.iter().find(|l| (l.abs() - 1.0).abs() > 1e-12) {
            return Err(ManifoldError::SpectralViolation(format!(
                "centre eigenvalue {l} is not +-1"
            )));
        }
        if !(self.kappa < 1.0 && self.kappa >= 0.0) {
            return Err(ManifoldError::SpectralViolation(format!(
                "kappa = {} must lie in [0, 1)",
                self.kappa
            )));
        }
        if let Some(l) = self.stable.iter().find(|l| !(l.abs() <= self.kappa)) {
            return Err(ManifoldError::SpectralViolation(format!(
                "stable eigenvalue {l} exceeds kappa = {}",
                self.kappa
            )));
        }
        Ok(())
    }

    fn diagonal(&self) -> Vec<f64> {
        self.unstable
            .iter()
            .chain(&self.centre)
            .chain(&self.stable)
            .copied()
            .collect()
    }
}

/// `psi(x, q) = a (1 + m cos x) |q|^2 e`, with `q = (u, c)` and `e` a unit
/// vector in the stable fibre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShearProfile {
    pub amplitude: f64,
    pub modulation: f64,
    pub direction: Vec<f64>,
}

impl ShearProfile {
    pub fn zero(stable_rank: usize) -> Self {
        let mut direction = vec![0.0; stable_rank];
        if let Some(d) = direction.first_mut() {
            *d = 1.0;
        }
        ShearProfile {
            amplitude: 0.0,
            modulation: 0.0,
            direction,
        }
    }

    pub fn stable_rank(&self) -> usize {
        self.direction.len()
    }

    fn scale(&self, x: f64, q: &[f64]) -> f64 {
        let q2: f64 = q.iter().map(|a| a * a).sum();
        self.amplitude * (1.0 + self.modulation * x.cos()) * q2
    }

    pub fn value(&self, x: f64, q: &[f64]) -> DVector<f64> {
        let s = self.scale(x, q);
        DVector::from_iterator(self.direction.len(), self.direction.iter().map(|e| s * e))
    }

    /// Writes `psi(x, q)` into `out`.
    pub fn value_into(&self, x: f64, q: &[f64], out: &mut [f64]) {
        let s = self.scale(x, q);
        for (o, e) in out.iter_mut().zip(&self.direction) {
            *o = s * e;
        }
    }

    /// Derivative with respect to `(x, q)`, shape `p x (1 + |q|)`.
    pub fn derivative(&self, x: f64, q: &[f64]) -> DMatrix<f64> {
        let q2: f64 = q.iter().map(|a| a * a).sum();
        let amp = self.amplitude * (1.0 + self.modulation * x.cos());
        let dx = -self.amplitude * self.modulation * x.sin() * q2;
        DMatrix::from_fn(self.direction.len(), 1 + q.len(), |i, j| {
            let e = self.direction[i];
            if j == 0 {
                dx * e
            } else {
                2.0 * amp * q[j - 1] * e
            }
        })
    }
}

/// The benchmark map `H o B o H^{-1}` with `B` the block map and
/// `H(x, q, s) = (x, q, s + psi(x, q))`.
#[derive(Debug, Clone)]
pub struct ShearMap {
    ranks: FibreRanks,
    blocks: BlockSpec,
    diag: Vec<f64>,
    shear: ShearProfile,
}

impl ShearMap {
    pub fn ranks(&self) -> FibreRanks {
        self.ranks
    }

    pub fn blocks(&self) -> &BlockSpec {
        &self.blocks
    }

    pub fn shear(&self) -> &ShearProfile {
        &self.shear
    }

    /// The unsheared block map on flattened fibre data.
    fn block_map(&self, x: f64, q: &[f64], s0: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let m = self.ranks.cu();
        let q2: f64 = q.iter().map(|a| a * a).sum();
        let s2: f64 = s0.iter().map(|a| a * a).sum();
        let x1 = x + self.blocks.base_drift * (q2 + s2);
        let q1: Vec<f64> = q.iter().zip(&self.diag[..m]).map(|(a, l)| a * l).collect();
        let beta = self.blocks.stable_cubic * q2;
        let s1: Vec<f64> = s0.iter().zip(&self.diag[m..]).map(|(a, l)| l * a + beta * a).collect();
        (x1, q1, s1)
    }
}

impl BundleMap for ShearMap {
    fn fibre_dim(&self) -> usize {
        self.ranks.total()
    }

    fn eval(&self, p: &BundlePoint) -> BundlePoint {
        let m = self.ranks.cu();
        let f = p.fibre.as_slice();
        let (q, s) = f.split_at(m);
        let mut s0 = vec![0.0; s.len()];
        self.shear.value_into(p.base, q, &mut s0);
        for (a, b) in s0.iter_mut().zip(s) {
            *a = b - *a;
        }
        let (x1, q1, mut s1) = self.block_map(p.base, q, &s0);
        let mut psi1 = vec![0.0; s.len()];
        self.shear.value_into(x1, &q1, &mut psi1);
        for (a, b) in s1.iter_mut().zip(&psi1) {
            *a += b;
        }
        let mut out = DVector::zeros(self.ranks.total());
        out.as_mut_slice()[..m].copy_from_slice(&q1);
        out.as_mut_slice()[m..].copy_from_slice(&s1);
        BundlePoint::new(x1, out)
    }

    fn normal_linearization(&self, _base: f64) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(self.diag.clone()))
    }
}

/// Constant linear fibre map `(x, v) -> (x, M v)`.
#[derive(Debug, Clone)]
pub struct LinearBundleMap {
    pub matrix: DMatrix<f64>,
}

impl BundleMap for LinearBundleMap {
    fn fibre_dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn eval(&self, p: &BundlePoint) -> BundlePoint {
        BundlePoint::new(p.base, &self.matrix * &p.fibre)
    }

    fn jacobian(&self, _p: &BundlePoint) -> DMatrix<f64> {
        let k = self.matrix.nrows();
        let mut j = DMatrix::zeros(k + 1, k + 1);
        j[(0, 0)] = 1.0;
        j.view_mut((1, 1), (k, k)).copy_from(&self.matrix);
        j
    }

    fn normal_linearization(&self, _base: f64) -> DMatrix<f64> {
        self.matrix.clone()
    }
}

/// Benchmark bundle: model, map, and the analytic invariant section.
#[derive(Debug, Clone)]
pub struct ShearBenchmark {
    pub model: ManifoldModel,
    pub map: Arc<ShearMap>,
    pub oracle: ShearProfile,
}

const SHEAR_SAMPLES: usize = 64;

pub fn make_shear_benchmark(
    model: &ManifoldModel,
    blocks: BlockSpec,
    shear: ShearProfile,
) -> Result<ShearBenchmark, ManifoldError> {
    blocks.validate()?;
    let ranks = blocks.ranks()?;
    if ranks != model.ranks() {
        return Err(ManifoldError::DimensionMismatch {
            expected: model.fibre_dim(),
            got: ranks.total(),
        });
    }
    if shear.stable_rank() != ranks.stable {
        return Err(ManifoldError::ShearViolation(format!(
            "shear direction has {} components, stable rank is {}",
            shear.stable_rank(),
            ranks.stable
        )));
    }
    let dn: f64 = shear.direction.iter().map(|a| a * a).sum::<f64>().sqrt();
    if ranks.stable > 0 && (dn - 1.0).abs() > 1e-12 {
        return Err(ManifoldError::ShearViolation(
            "shear direction must be a unit vector".into(),
        ));
    }
    check_shear(model, &shear, ranks)?;
    let diag = blocks.diagonal();
    Ok(ShearBenchmark {
        model: model.clone(),
        map: Arc::new(ShearMap {
            ranks,
            blocks,
            diag,
            shear: shear.clone(),
        }),
        oracle: shear,
    })
}

/// Sampled checks: `psi(x, 0) = 0`, `D psi(x, 0) = 0`, `Lip(psi) <= 1` on the
/// reach tube.
fn check_shear(model: &ManifoldModel, shear: &ShearProfile, ranks: FibreRanks) -> Result<(), ManifoldError> {
    let m = ranks.cu();
    let (lo, hi) = model.param_range();
    let tube = model.reach();
    for i in 0..SHEAR_SAMPLES {
        let x = lo + (hi - lo) * i as f64 / SHEAR_SAMPLES as f64;
        let zero = vec![0.0; m];
        if shear.value(x, &zero).amax() != 0.0 {
            return Err(ManifoldError::ShearViolation(format!("psi({x}, 0) != 0")));
        }
        if shear.derivative(x, &zero).amax() > 1e-12 {
            return Err(ManifoldError::ShearViolation(format!("D psi({x}, 0) != 0")));
        }
        if m == 0 {
            continue;
        }
        for j in 0..SHEAR_SAMPLES {
            // directions cycling through coordinate axes and diagonals
            let mut q = vec![0.0; m];
            q[j % m] = 1.0;
            if j % 2 == 1 {
                q.iter_mut().for_each(|a| *a = 1.0);
            }
            let n = q.iter().map(|a| a * a).sum::<f64>().sqrt();
            let rad = tube * (1 + j % 4) as f64 / 4.0;
            q.iter_mut().for_each(|a| *a *= rad / n);
            let d = shear.derivative(x, &q);
            let lip = crate::linalg::op_norm(&d);
            if lip > 1.0 {
                return Err(ManifoldError::ShearViolation(format!(
                    "Lip(psi) ~ {lip} > 1 at x = {x}, |q| = {rad}"
                )));
            }
        }
    }
    Ok(())
}
