use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, SMatrix, SVector};
use serde::Serialize;

use super::problem::{
    from_vec8, grad_step, gradient, hessian, minimiser_chart, singular_values2, to_vec8, FactorizationProblem,
    LiftedState, Vec8,
};
use super::EosError;
use crate::linalg::{gram_schmidt, orthogonal_complement, sigma_min, sym_eigen_desc};
use crate::tolerances::{LIFTED_SPECTRUM, SPECTRAL_GAP};

pub type Vec9 = SVector<f64, 9>;
pub type Mat9 = SMatrix<f64, 9, 9>;

/// Gap below which a factor counts as a multiple of an orthogonal matrix.
pub const BAD_SET_GAP: f64 = 1e-10;

/// `W2 W2^T (x) I + I (x) W1^T W1`, the Gauss-Newton operator `Dg Dg^T`
/// on row-major `vec(W2 W1)`.
pub fn gauss_newton_operator(w1: &Matrix2<f64>, w2: &Matrix2<f64>) -> Matrix4<f64> {
    let i2 = Matrix2::<f64>::identity();
    let a2 = w2 * w2.transpose();
    let a1 = w1.transpose() * w1;
    a2.kronecker(&i2) + i2.kronecker(&a1)
}

/// `Dg` as a 4x8 matrix in row-major coordinates.
pub fn dg(w1: &Matrix2<f64>, w2: &Matrix2<f64>) -> SMatrix<f64, 4, 8> {
    let i2 = Matrix2::<f64>::identity();
    let left = w2.kronecker(&i2);
    let right = i2.kronecker(&w1.transpose());
    let mut out = SMatrix::<f64, 4, 8>::zeros();
    out.fixed_view_mut::<4, 4>(0, 0).copy_from(&left);
    out.fixed_view_mut::<4, 4>(0, 4).copy_from(&right);
    out
}

/// Top Gauss-Newton eigenvalue `|W2|_2^2 + |W1|_2^2`.
pub fn lambda1(w1: &Matrix2<f64>, w2: &Matrix2<f64>) -> f64 {
    let s1 = singular_values2(w1)[0];
    let s2 = singular_values2(w2)[0];
    s2 * s2 + s1 * s1
}

/// Distance of each factor from the multiples of orthogonal matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BadSetGap {
    pub g1: f64,
    pub g2: f64,
    pub is_member: bool,
}

impl BadSetGap {
    pub fn min(&self) -> f64 {
        self.g1.min(self.g2)
    }
}

pub fn bad_set_gap(w1: &Matrix2<f64>, w2: &Matrix2<f64>) -> BadSetGap {
    let s1 = singular_values2(w1);
    let s2 = singular_values2(w2);
    let g1 = s1[0] - s1[1];
    let g2 = s2[0] - s2[1];
    BadSetGap {
        g1,
        g2,
        is_member: g1.min(g2) <= BAD_SET_GAP,
    }
}

/// The lifted map `(x, eta) -> (x - eta grad l(x), eta)` on R^9.
pub fn lifted_map(problem: &FactorizationProblem, z: &Vec9) -> Vec9 {
    let (w1, w2) = from_vec8(&z.as_slice()[..8]);
    let s = grad_step(problem, &LiftedState::new(w1, w2, z[8]));
    let x = to_vec8(&s.w1, &s.w2);
    let mut out = Vec9::zeros();
    out.fixed_rows_mut::<8>(0).copy_from(&x);
    out[8] = z[8];
    out
}

pub fn state_to_vec9(s: &LiftedState) -> Vec9 {
    let mut z = Vec9::zeros();
    z.fixed_rows_mut::<8>(0).copy_from(&to_vec8(&s.w1, &s.w2));
    z[8] = s.eta;
    z
}

/// `[[I - eta H, -grad l], [0, 1]]`.
pub fn lifted_jacobian(problem: &FactorizationProblem, s: &LiftedState) -> Mat9 {
    let h = hessian(problem, &s.w1, &s.w2);
    let (g1, g2) = gradient(problem, &s.w1, &s.w2);
    let g = to_vec8(&g1, &g2);
    let mut j = Mat9::identity();
    j.fixed_view_mut::<8, 8>(0, 0)
        .copy_from(&(SMatrix::<f64, 8, 8>::identity() - h * s.eta));
    j.fixed_view_mut::<8, 1>(0, 8).copy_from(&(-g));
    j
}

/// Central-difference Jacobian of the lifted map.
pub fn lifted_jacobian_fd(problem: &FactorizationProblem, s: &LiftedState, step: f64) -> Mat9 {
    let z = state_to_vec9(s);
    let mut j = Mat9::zeros();
    for k in 0..9 {
        let mut zp = z;
        let mut zm = z;
        zp[k] += step;
        zm[k] -= step;
        j.set_column(
            k,
            &((lifted_map(problem, &zp) - lifted_map(problem, &zm)) / (2.0 * step)),
        );
    }
    j
}

/// Unit top eigenvector of the loss Hessian.
pub fn top_direction(problem: &FactorizationProblem, w1: &Matrix2<f64>, w2: &Matrix2<f64>) -> Vec8 {
    let h = hessian(problem, w1, w2);
    let (_, vecs) = sym_eigen_desc(&DMatrix::from_column_slice(8, 8, h.as_slice()));
    let mut v = Vec8::from_iterator(vecs.column(0).iter().copied());
    // fix the sign so runs are reproducible across backends
    let k = v.iamax();
    if v[k] < 0.0 {
        v = -v;
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralSplitReport {
    /// Nonzero Hessian eigenvalues `alpha_2i + alpha_1j`, descending.
    pub hessian_eigenvalues: Vec<f64>,
    pub lambda1: f64,
    pub gap: BadSetGap,
    /// Eigenvalues of the 9x9 lifted Jacobian, ascending.
    pub jacobian_eigenvalues: Vec<f64>,
    pub plus_one_multiplicity: usize,
    pub minus_one_multiplicity: usize,
    pub minus_one_direction: Vec<f64>,
    /// Eigenvalues of the lifted Jacobian on the normal complement of T, ascending.
    pub normal_eigenvalues: Vec<f64>,
    pub centre_eigenvalues: Vec<f64>,
    pub stable_eigenvalues: Vec<f64>,
    /// Max gap between the analytic and finite-difference lifted Jacobians.
    pub fd_discrepancy: f64,
    /// `max |J t - t|` over the computed tangent basis of T.
    pub tangent_residual: f64,
    /// Asymmetry of the Jacobian restricted to the normal complement.
    pub normal_asymmetry: f64,
    /// Cosine of the largest principal angle between the computed centre
    /// space and `span{d/d eta, top Hessian eigenvector}`.
    pub centre_alignment: f64,
}

/// Tangent basis of T at the chart point `A`: analytic velocities of
/// `(A, Y A^{-1})` and central differences of `2 / lambda_1`.
pub fn tangent_of_t(problem: &FactorizationProblem, a: &Matrix2<f64>) -> Result<DMatrix<f64>, EosError> {
    let inv = a
        .try_inverse()
        .ok_or(EosError::SingularChartMatrix { det: a.determinant() })?;
    let eta_of = |b: &Matrix2<f64>| -> Result<f64, EosError> {
        let (w1, w2) = minimiser_chart(problem, b)?;
        Ok(2.0 / lambda1(&w1, &w2))
    };
    let step = 1e-6 * a.amax().max(1.0);
    let mut t = DMatrix::zeros(9, 4);
    for k in 0..4 {
        let mut da = Matrix2::zeros();
        da[(k / 2, k % 2)] = 1.0;
        let dw2 = -(problem.y * inv * da * inv);
        let deta = (eta_of(&(a + da * step))? - eta_of(&(a - da * step))?) / (2.0 * step);
        let x = to_vec8(&da, &dw2);
        for i in 0..8 {
            t[(i, k)] = x[i];
        }
        t[(8, k)] = deta;
    }
    gram_schmidt(&t).ok_or_else(|| EosError::InvalidInput("chart velocities are degenerate".into()))
}

/// Eigen-splitting of the lifted Jacobian at a point of T over the chart `A`.
pub fn splitting_at(problem: &FactorizationProblem, a: &Matrix2<f64>) -> Result<SpectralSplitReport, EosError> {
    let (w1, w2) = minimiser_chart(problem, a)?;
    let s = super::lift_to_t(problem, &w1, &w2)?;
    let gap = bad_set_gap(&w1, &w2);
    if gap.is_member {
        return Err(EosError::OnBadSet { gap: gap.min() });
    }
    let z = state_to_vec9(&s);
    let moved = (lifted_map(problem, &z) - z).amax();
    if moved > 1e-12 * (1.0 + z.amax()) {
        return Err(EosError::NotFixedPoint { residual: moved });
    }

    let gn = gauss_newton_operator(&w1, &w2);
    let (mut hess_eigs, _) = sym_eigen_desc(&DMatrix::from_column_slice(4, 4, gn.as_slice()));
    hess_eigs.sort_by(|a, b| b.total_cmp(a));

    let j = lifted_jacobian(problem, &s);
    let jd = DMatrix::from_column_slice(9, 9, j.as_slice());
    let fd = lifted_jacobian_fd(problem, &s, 1e-6);
    let fd_discrepancy = (fd - j).amax();

    let (mut eigs, vecs) = sym_eigen_desc(&jd);
    let minus_idx = eigs
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 + 1.0).abs().total_cmp(&(b.1 + 1.0).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let minus_one_direction: Vec<f64> = vecs.column(minus_idx).iter().copied().collect();
    let plus_one_multiplicity = eigs.iter().filter(|e| (*e - 1.0).abs() <= LIFTED_SPECTRUM).count();
    let minus_one_multiplicity = eigs.iter().filter(|e| (*e + 1.0).abs() <= LIFTED_SPECTRUM).count();
    eigs.sort_by(f64::total_cmp);

    let t = tangent_of_t(problem, a)?;
    let tangent_residual = (&jd * &t - &t).amax();
    let n = orthogonal_complement(&t);
    let reduced = n.transpose() * &jd * &n;
    let normal_asymmetry = crate::linalg::asymmetry(&reduced);
    let (mut normal, nvecs) = sym_eigen_desc(&reduced);
    let centre_cols: Vec<usize> = (0..normal.len())
        .filter(|&i| (normal[i].abs() - 1.0).abs() <= SPECTRAL_GAP)
        .collect();
    let mut centre: Vec<f64> = centre_cols.iter().map(|&i| normal[i]).collect();
    let mut stable: Vec<f64> = normal
        .iter()
        .copied()
        .filter(|e| e.abs() < 1.0 - SPECTRAL_GAP)
        .collect();
    centre.sort_by(f64::total_cmp);
    stable.sort_by(f64::total_cmp);
    normal.sort_by(f64::total_cmp);

    let ec = DMatrix::from_fn(9, centre_cols.len(), |r, c| (&n * nvecs.column(centre_cols[c]))[r]);
    let top = top_direction(problem, &w1, &w2);
    let mut reference = DMatrix::zeros(9, 2);
    reference[(8, 0)] = 1.0;
    for i in 0..8 {
        reference[(i, 1)] = top[i];
    }
    let centre_alignment = if ec.ncols() == 2 {
        sigma_min(&(ec.transpose() * reference))
    } else {
        0.0
    };

    Ok(SpectralSplitReport {
        hessian_eigenvalues: hess_eigs,
        lambda1: lambda1(&w1, &w2),
        gap,
        jacobian_eigenvalues: eigs,
        plus_one_multiplicity,
        minus_one_multiplicity,
        minus_one_direction,
        normal_eigenvalues: normal,
        centre_eigenvalues: centre,
        stable_eigenvalues: stable,
        fd_discrepancy,
        tangent_residual,
        normal_asymmetry,
        centre_alignment,
    })
}

/// Eigenvector columns of the Gauss-Newton operator predicted by the
/// Kronecker structure: `vec(e_2i e_1j^T)` for eigenvectors `e_2i` of
/// `W2 W2^T` and `e_1j` of `W1^T W1`, with eigenvalue `alpha_2i + alpha_1j`.
pub fn kronecker_eigenpairs(w1: &Matrix2<f64>, w2: &Matrix2<f64>) -> Vec<(f64, DVector<f64>)> {
    let e2 = (w2 * w2.transpose()).symmetric_eigen();
    let e1 = (w1.transpose() * w1).symmetric_eigen();
    let mut out = Vec::with_capacity(4);
    for i in 0..2 {
        for j in 0..2 {
            let m = e2.eigenvectors.column(i) * e1.eigenvectors.column(j).transpose();
            let v = DVector::from_vec(vec![m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]);
            out.push((e2.eigenvalues[i] + e1.eigenvalues[j], v));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked() -> (FactorizationProblem, Matrix2<f64>) {
        (
            FactorizationProblem::from_rows([[2.0, 0.0], [0.0, 1.0]]).unwrap(),
            Matrix2::new(1.0, 0.0, 0.0, 2.0),
        )
    }

    #[test]
    fn worked_gauss_newton_spectrum() {
        let w1 = Matrix2::new(1.0, 0.0, 0.0, 2.0);
        let w2 = Matrix2::new(2.0, 0.0, 0.0, 0.5);
        let gn = gauss_newton_operator(&w1, &w2);
        let (e, _) = sym_eigen_desc(&DMatrix::from_column_slice(4, 4, gn.as_slice()));
        for (got, want) in e.iter().zip([8.0, 5.0, 4.25, 1.25]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(lambda1(&w1, &w2), 8.0);
        assert_eq!(lambda1(&Matrix2::identity(), &Matrix2::new(2.0, 0.0, 0.0, 1.0)), 5.0);
        assert_eq!(
            gauss_newton_operator(&Matrix2::zeros(), &Matrix2::zeros()),
            Matrix4::zeros()
        );
    }

    #[test]
    fn dg_factorises_gauss_newton() {
        let w1 = Matrix2::new(0.3, 1.0, -0.2, 0.4);
        let w2 = Matrix2::new(1.1, 0.0, 0.5, -0.7);
        let d = dg(&w1, &w2);
        assert!((d * d.transpose() - gauss_newton_operator(&w1, &w2)).amax() < 1e-14);
    }

    #[test]
    fn kronecker_eigenvectors() {
        let w1 = Matrix2::new(0.3, 1.0, -0.2, 0.4);
        let w2 = Matrix2::new(1.1, 0.0, 0.5, -0.7);
        let gn = gauss_newton_operator(&w1, &w2);
        let gd = DMatrix::from_column_slice(4, 4, gn.as_slice());
        for (lam, v) in kronecker_eigenpairs(&w1, &w2) {
            assert!((&gd * &v - &v * lam).amax() < 1e-12);
        }
    }

    #[test]
    fn bad_set_examples() {
        let g = bad_set_gap(&Matrix2::identity(), &Matrix2::new(2.0, 0.0, 0.0, 1.0));
        assert!(g.is_member && g.g1 == 0.0);
        let g = bad_set_gap(&Matrix2::new(1.0, 0.0, 0.0, 2.0), &Matrix2::new(2.0, 0.0, 0.0, 0.5));
        assert!(!g.is_member);
        assert!((g.g1 - 1.0).abs() < 1e-15 && (g.g2 - 1.5).abs() < 1e-15);
        let (c, s) = (0.7f64.cos(), 0.7f64.sin());
        let g = bad_set_gap(&(Matrix2::new(c, -s, s, c) * 2.0), &Matrix2::new(1.0, 3.0, 0.0, 1.0));
        assert!(g.is_member);
    }

    #[test]
    fn worked_splitting() {
        let (p, a) = worked();
        let r = splitting_at(&p, &a).unwrap();
        assert_eq!(r.plus_one_multiplicity, 5);
        assert_eq!(r.minus_one_multiplicity, 1);
        assert_eq!(r.stable_eigenvalues.len(), 3);
        for (got, want) in r.stable_eigenvalues.iter().zip([-0.25, -0.0625, 0.6875]) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
        assert_eq!(r.centre_eigenvalues.len(), 2);
        assert!(r.fd_discrepancy < 1e-6);
        assert!(r.tangent_residual < 1e-12);
    }

    #[test]
    fn splitting_rejects_bad_set() {
        let p = FactorizationProblem::from_rows([[2.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(
            splitting_at(&p, &Matrix2::identity()),
            Err(EosError::OnBadSet { .. })
        ));
    }
}
