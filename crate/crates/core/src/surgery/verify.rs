use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::blend::{signed_splitting, SubBundle};
use super::collar::{CollarSpec, End};
use super::SurgeryError;
use crate::extension::BundleMap;
use crate::linalg::{asymmetry, fd_jacobian, sym_eigen_desc};
use crate::manifold::BundlePoint;
use crate::tolerances::{BLOCK_STRUCTURE, FIXED_SET, LIFTED_SPECTRUM};

/// Sampling for [`verify_surgery`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyGrid {
    /// Base nodes on `S''`; each collar gets the same number again.
    pub base_nodes: usize,
    /// Fibre samples per base node.
    pub fibre_samples: usize,
    /// Fibre radius of the sampled region as a multiple of `r`.
    pub margin: f64,
    pub seed: u64,
}

impl Default for VerifyGrid {
    fn default() -> Self {
        VerifyGrid {
            base_nodes: 48,
            fibre_samples: 24,
            margin: 2.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePoint {
    pub base: f64,
    pub fibre: Vec<f64>,
}

impl SamplePoint {
    fn of(p: &BundlePoint) -> Self {
        SamplePoint {
            base: p.base,
            fibre: p.fibre.iter().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurgeryItem {
    pub item: u8,
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub worst: Option<SamplePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurgeryReport {
    pub items: Vec<SurgeryItem>,
    /// Base drift of the unmodified map on boundary fibres, for comparison
    /// with item 1.
    pub original_boundary_drift: f64,
    pub pass: bool,
}

impl SurgeryReport {
    pub fn item(&self, k: u8) -> &SurgeryItem {
        &self.items[(k - 1) as usize]
    }
}

struct Worst {
    value: f64,
    at: Option<SamplePoint>,
}

impl Worst {
    fn new() -> Self {
        Worst { value: 0.0, at: None }
    }
    fn push(&mut self, v: f64, p: &BundlePoint) {
        if v.is_nan() || v > self.value {
            self.value = v;
            self.at = Some(SamplePoint::of(p));
        }
    }
    fn item(self, item: u8, name: &str, tolerance: f64) -> SurgeryItem {
        SurgeryItem {
            item,
            name: name.into(),
            pass: self.value <= tolerance,
            value: self.value,
            tolerance,
            worst: self.at,
        }
    }
}

fn random_fibre<R: Rng>(rng: &mut R, k: usize, radius: f64) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v * (radius / n);
        }
    }
}

/// Numerical check of the five properties of the patched map `f'` against
/// the original `f`:
/// 1. fibres over `dS'` (within `r/2`) are mapped into themselves;
/// 2. `f' = f` bit-for-bit outside the tube;
/// 3. `f'` fixes `S''`;
/// 4. `Df'` along `S''` is block diagonal and symmetric;
/// 5. `Df'` on the signed pieces of the splitting of `Df` keeps its bounds:
///    eigenvalues of modulus `<= kappa` on `E_s`, `= +-1` on `E_c^+-`, `> 1` in modulus with
///    the right sign on `E_u^+-`.
pub fn verify_surgery(
    f_prime: &dyn BundleMap,
    f: &dyn BundleMap,
    collar: &CollarSpec,
    kappa: f64,
    grid: &VerifyGrid,
) -> Result<SurgeryReport, SurgeryError> {
    if grid.base_nodes < 2 || grid.fibre_samples == 0 {
        return Err(SurgeryError::InvalidInput("verification grid is empty".into()));
    }
    let k = f.fibre_dim();
    let r = collar.r;
    let mut rng = ChaCha8Rng::seed_from_u64(grid.seed);
    let (lo, hi) = collar.s_double;
    let mut bases: Vec<f64> = (0..grid.base_nodes)
        .map(|i| lo + (hi - lo) * i as f64 / (grid.base_nodes - 1) as f64)
        .collect();
    for end in End::BOTH {
        for i in 0..grid.base_nodes {
            let t = -collar.depth + 2.0 * collar.depth * i as f64 / (grid.base_nodes - 1) as f64;
            bases.push(collar.psi(end, t));
        }
        bases.push(collar.boundary(end));
    }

    // 1
    let mut item1 = Worst::new();
    let mut original: f64 = 0.0;
    for end in End::BOTH {
        let x = collar.boundary(end);
        for j in 0..grid.fibre_samples {
            let rad = 0.5 * r * (j + 1) as f64 / grid.fibre_samples as f64;
            let p = BundlePoint::new(x, random_fibre(&mut rng, k, rad));
            item1.push((f_prime.eval(&p).base - x).abs(), &p);
            original = original.max((f.eval(&p).base - x).abs());
        }
    }

    // 2
    let mut item2 = Worst::new();
    for &x in &bases {
        for j in 0..grid.fibre_samples {
            let rad = grid.margin * r * (j + 1) as f64 / grid.fibre_samples as f64;
            let p = BundlePoint::new(x, random_fibre(&mut rng, k, rad));
            let inside = p.fibre.norm() < r && matches!(collar.collar_coord(x), Some((_, t)) if t.abs() < r);
            if inside {
                continue;
            }
            let a = f_prime.eval(&p);
            let b = f.eval(&p);
            let d = if a.base.to_bits() == b.base.to_bits() && a.fibre == b.fibre {
                0.0
            } else {
                (a.base - b.base)
                    .abs()
                    .max((a.fibre - b.fibre).amax())
                    .max(f64::MIN_POSITIVE)
            };
            item2.push(d, &p);
        }
    }

    // 3, 4, 5
    let mut item3 = Worst::new();
    let mut item4 = Worst::new();
    let mut item5 = Worst::new();
    for &x in &bases {
        let p = BundlePoint::zero_section(x, k);
        let y = f_prime.eval(&p);
        item3.push((y.base - x).abs().max(y.fibre.amax()), &p);

        let j = f_prime.jacobian(&p);
        let mut off: f64 = 0.0;
        for i in 1..=k {
            off = off.max(j[(0, i)].abs()).max(j[(i, 0)].abs());
        }
        item4.push(off.max(asymmetry(&j)), &p);

        let jn = j.view((1, 1), (k, k)).into_owned();
        let split = signed_splitting(&f.normal_linearization(x))?;
        let mut worst: f64 = 0.0;
        for (kind, basis) in &split.parts {
            let m = basis.transpose() * &jn * basis;
            let leak = (&jn * basis - basis * &m).amax();
            let (eigs, _) = sym_eigen_desc(&m);
            let mut v = leak;
            for e in eigs {
                let bad = match kind {
                    SubBundle::Stable => (e.abs() - kappa).max(0.0),
                    SubBundle::CentrePlus => (e - 1.0).abs(),
                    SubBundle::CentreMinus => (e + 1.0).abs(),
                    SubBundle::UnstablePlus => (1.0 - e).max(0.0),
                    SubBundle::UnstableMinus => (1.0 + e).max(0.0),
                };
                v = v.max(bad);
            }
            worst = worst.max(v);
        }
        item5.push(worst, &p);
    }

    let items = vec![
        item1.item(1, "boundary fibres preserved", FIXED_SET),
        item2.item(2, "equals f outside the tube", 0.0),
        item3.item(3, "fixes S''", FIXED_SET),
        item4.item(4, "block diagonal and symmetric along S''", BLOCK_STRUCTURE),
        item5.item(5, "spectral bounds on the signed splitting", LIFTED_SPECTRUM),
    ];
    let pass = items.iter().all(|i| i.pass);
    Ok(SurgeryReport {
        items,
        original_boundary_drift: original,
        pass,
    })
}

/// Largest `|Df'(x, 0) - Df(x, 0)|` over the collar nodes; zero up to
/// finite-difference noise when the blend leaves the linearisation alone.
pub fn linearization_change(f_prime: &dyn BundleMap, f: &dyn BundleMap, collar: &CollarSpec, n: usize) -> f64 {
    let k = f.fibre_dim();
    let mut worst: f64 = 0.0;
    for end in End::BOTH {
        for i in 0..n {
            let t = -collar.r + 2.0 * collar.r * i as f64 / (n.max(2) - 1) as f64;
            let x = collar.psi(end, t);
            let v = BundlePoint::zero_section(x, k).to_vector();
            let a = fd_jacobian(|z| f_prime.eval(&BundlePoint::from_vector(z)).to_vector(), &v);
            let b = fd_jacobian(|z| f.eval(&BundlePoint::from_vector(z)).to_vector(), &v);
            worst = worst.max((a - b).amax());
        }
    }
    worst
}
