use nalgebra::{Matrix2, SMatrix, SVector};

use super::EosError;

pub type Vec8 = SVector<f64, 8>;
pub type Mat8 = SMatrix<f64, 8, 8>;

/// Loss level below which a point counts as a minimiser.
pub const MINIMISER_LOSS: f64 = 1e-10;

/// Target `Y` of the factorisation loss `|Y - W2 W1|^2 / 2` with its SVD.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationProblem {
    pub y: Matrix2<f64>,
    pub u: Matrix2<f64>,
    /// Singular values, descending.
    pub sigma: [f64; 2],
    pub v: Matrix2<f64>,
    /// `sigma_1 > sigma_2 > 0`.
    pub regular: bool,
}

impl FactorizationProblem {
    pub fn new(y: Matrix2<f64>) -> Result<Self, EosError> {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(EosError::InvalidInput("target has non-finite entries".into()));
        }
        let (u, sigma, v) = svd2(&y);
        let regular = sigma[0] > sigma[1] && sigma[1] > 0.0;
        Ok(FactorizationProblem {
            y,
            u,
            sigma,
            v,
            regular,
        })
    }

    pub fn from_rows(rows: [[f64; 2]; 2]) -> Result<Self, EosError> {
        Self::new(mat2(rows))
    }

    /// `U diag(sigma) V^T`.
    pub fn reconstruct(&self) -> Matrix2<f64> {
        self.u * Matrix2::from_diagonal(&nalgebra::Vector2::new(self.sigma[0], self.sigma[1])) * self.v.transpose()
    }
}

/// Point `(W1, W2, eta)` of the lifted gradient-descent map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftedState {
    pub w1: Matrix2<f64>,
    pub w2: Matrix2<f64>,
    pub eta: f64,
}

impl LiftedState {
    pub fn new(w1: Matrix2<f64>, w2: Matrix2<f64>, eta: f64) -> Self {
        LiftedState { w1, w2, eta }
    }

    pub fn is_finite(&self) -> bool {
        self.w1.iter().chain(self.w2.iter()).all(|v| v.is_finite()) && self.eta.is_finite()
    }
}

pub fn mat2(rows: [[f64; 2]; 2]) -> Matrix2<f64> {
    Matrix2::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1])
}

pub fn rows2(m: &Matrix2<f64>) -> [[f64; 2]; 2] {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

/// SVD with singular values sorted descending and `U S V^T = m`.
pub fn svd2(m: &Matrix2<f64>) -> (Matrix2<f64>, [f64; 2], Matrix2<f64>) {
    let svd = m.svd(true, true);
    let mut u = svd.u.expect("svd u");
    let mut vt = svd.v_t.expect("svd v_t");
    let mut s = [svd.singular_values[0], svd.singular_values[1]];
    if s[1] > s[0] {
        s.swap(0, 1);
        u.swap_columns(0, 1);
        vt.swap_rows(0, 1);
    }
    (u, s, vt.transpose())
}

/// Singular values of a 2x2 matrix, descending.
pub fn singular_values2(m: &Matrix2<f64>) -> [f64; 2] {
    let s = m.singular_values();
    if s[0] >= s[1] {
        [s[0], s[1]]
    } else {
        [s[1], s[0]]
    }
}

/// Row-major stacking `(vec W1, vec W2)`.
pub fn to_vec8(w1: &Matrix2<f64>, w2: &Matrix2<f64>) -> Vec8 {
    Vec8::from_column_slice(&[
        w1[(0, 0)],
        w1[(0, 1)],
        w1[(1, 0)],
        w1[(1, 1)],
        w2[(0, 0)],
        w2[(0, 1)],
        w2[(1, 0)],
        w2[(1, 1)],
    ])
}

pub fn from_vec8(x: &[f64]) -> (Matrix2<f64>, Matrix2<f64>) {
    (
        Matrix2::new(x[0], x[1], x[2], x[3]),
        Matrix2::new(x[4], x[5], x[6], x[7]),
    )
}

pub fn loss(problem: &FactorizationProblem, w1: &Matrix2<f64>, w2: &Matrix2<f64>) -> f64 {
    0.5 * (w2 * w1 - problem.y).norm_squared()
}

/// Gradients `(W2^T R, R W1^T)` with `R = W2 W1 - Y`.
pub fn gradient(problem: &FactorizationProblem, w1: &Matrix2<f64>, w2: &Matrix2<f64>) -> (Matrix2<f64>, Matrix2<f64>) {
    let r = w2 * w1 - problem.y;
    (w2.transpose() * r, r * w1.transpose())
}

pub fn grad_step(problem: &FactorizationProblem, s: &LiftedState) -> LiftedState {
    let (g1, g2) = gradient(problem, &s.w1, &s.w2);
    LiftedState {
        w1: s.w1 - g1 * s.eta,
        w2: s.w2 - g2 * s.eta,
        eta: s.eta,
    }
}

/// Hessian of the loss in the row-major `(vec W1, vec W2)` coordinates,
/// assembled from the exact bilinear expansion of the gradient.
pub fn hessian(problem: &FactorizationProblem, w1: &Matrix2<f64>, w2: &Matrix2<f64>) -> Mat8 {
    let r = w2 * w1 - problem.y;
    let mut h = Mat8::zeros();
    for j in 0..8 {
        let mut e = Vec8::zeros();
        e[j] = 1.0;
        let (d1, d2) = from_vec8(e.as_slice());
        let dr = d2 * w1 + w2 * d1;
        let g1 = d2.transpose() * r + w2.transpose() * dr;
        let g2 = dr * w1.transpose() + r * d1.transpose();
        h.set_column(j, &to_vec8(&g1, &g2));
    }
    h
}

/// Point `(A, Y A^{-1})` of the minimiser manifold.
pub fn minimiser_chart(
    problem: &FactorizationProblem,
    a: &Matrix2<f64>,
) -> Result<(Matrix2<f64>, Matrix2<f64>), EosError> {
    let det = a.determinant();
    if !(det.abs() > 1e-10) {
        return Err(EosError::SingularChartMatrix { det });
    }
    let inv = a.try_inverse().ok_or(EosError::SingularChartMatrix { det })?;
    Ok((*a, problem.y * inv))
}

/// `(W1, W2, 2 / lambda_1)`: the point of the lifted fixed-point manifold over a minimiser.
pub fn lift_to_t(
    problem: &FactorizationProblem,
    w1: &Matrix2<f64>,
    w2: &Matrix2<f64>,
) -> Result<LiftedState, EosError> {
    let l = loss(problem, w1, w2);
    if !(l <= MINIMISER_LOSS) {
        return Err(EosError::NotOnMinimiserManifold { loss: l });
    }
    let lam = super::lambda1(w1, w2);
    if !(lam > 0.0) {
        return Err(EosError::DegenerateLambda(lam));
    }
    Ok(LiftedState::new(*w1, *w2, 2.0 / lam))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn y21() -> FactorizationProblem {
        FactorizationProblem::from_rows([[2.0, 0.0], [0.0, 1.0]]).unwrap()
    }

    #[test]
    fn loss_at_zero() {
        let p = y21();
        assert_eq!(loss(&p, &Matrix2::zeros(), &Matrix2::zeros()), 2.5);
    }

    #[test]
    fn svd_reconstructs_and_sorts() {
        let p = FactorizationProblem::from_rows([[0.3, -1.2], [0.7, 2.1]]).unwrap();
        assert!((p.reconstruct() - p.y).amax() < 1e-12);
        assert!(p.sigma[0] >= p.sigma[1]);
        assert!(p.regular);
        let q = FactorizationProblem::from_rows([[1.0, 0.0], [0.0, 3.0]]).unwrap();
        assert_eq!(q.sigma, [3.0, 1.0]);
        assert!((q.reconstruct() - q.y).amax() < 1e-12);
        assert!(
            !FactorizationProblem::from_rows([[1.0, 0.0], [0.0, 1.0]])
                .unwrap()
                .regular
        );
    }

    #[test]
    fn chart_worked_example() {
        let p = y21();
        let (w1, w2) = minimiser_chart(&p, &Matrix2::new(1.0, 0.0, 0.0, 2.0)).unwrap();
        assert_eq!(w2, Matrix2::new(2.0, 0.0, 0.0, 0.5));
        assert!(loss(&p, &w1, &w2) < 1e-24);
        assert!(matches!(
            minimiser_chart(&p, &Matrix2::new(1.0, 2.0, 0.5, 1.0)),
            Err(EosError::SingularChartMatrix { .. })
        ));
    }

    #[test]
    fn lift_values() {
        let p = y21();
        let s = lift_to_t(&p, &Matrix2::identity(), &p.y).unwrap();
        assert!((s.eta - 0.4).abs() < 1e-15);
        let (w1, w2) = minimiser_chart(&p, &Matrix2::new(1.0, 0.0, 0.0, 2.0)).unwrap();
        let s = lift_to_t(&p, &w1, &w2).unwrap();
        assert!((s.eta - 0.25).abs() < 1e-15);
        assert_eq!(grad_step(&p, &s), s);
        assert!(matches!(
            lift_to_t(&p, &Matrix2::zeros(), &Matrix2::zeros()),
            Err(EosError::NotOnMinimiserManifold { .. })
        ));
    }

    #[test]
    fn zero_step_is_identity() {
        let p = y21();
        let s = LiftedState::new(
            Matrix2::new(0.3, 1.0, -0.2, 0.4),
            Matrix2::new(1.1, 0.0, 0.5, -0.7),
            0.0,
        );
        assert_eq!(grad_step(&p, &s), s);
    }

    #[test]
    fn hessian_is_symmetric_and_matches_gradient_differences() {
        let p = y21();
        let w1 = Matrix2::new(0.3, 1.0, -0.2, 0.4);
        let w2 = Matrix2::new(1.1, 0.0, 0.5, -0.7);
        let h = hessian(&p, &w1, &w2);
        assert!((h - h.transpose()).amax() < 1e-14);
        let x = to_vec8(&w1, &w2);
        let step = 1e-6;
        for j in 0..8 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += step;
            xm[j] -= step;
            let g = |v: &Vec8| {
                let (a, b) = from_vec8(v.as_slice());
                let (g1, g2) = gradient(&p, &a, &b);
                to_vec8(&g1, &g2)
            };
            let col = (g(&xp) - g(&xm)) / (2.0 * step);
            assert!((col - h.column(j)).amax() < 1e-8);
        }
    }
}
