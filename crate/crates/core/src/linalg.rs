//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::tolerances::FD_STEP;

/// Finite-difference step for a point of the given norm.
pub fn fd_step(norm: f64) -> f64 {
    FD_STEP * norm.max(1.0)
}

/// Central-difference Jacobian of `f` at `x`.
pub fn fd_jacobian<F>(f: F, x: &DVector<f64>) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    fd_jacobian_step(f, x, fd_step(x.norm()))
}

/// Central-difference Jacobian with an explicit step.
pub fn fd_jacobian_step<F>(f: F, x: &DVector<f64>, h: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = x.len();
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut xp = x.clone();
    for j in 0..n {
        let orig = xp[j];
        xp[j] = orig + h;
        let fp = f(&xp);
        xp[j] = orig - h;
        let fm = f(&xp);
        xp[j] = orig;
        cols.push((fp - fm) / (2.0 * h));
    }
    let m = cols.first().map_or(0, |c| c.len());
    DMatrix::from_fn(m, n, |i, j| cols[j][i])
}

/// One-sided difference Jacobian. `sign` is `+1.0` (forward) or `-1.0` (backward).
pub fn fd_jacobian_one_sided<F>(f: F, x: &DVector<f64>, sign: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let h = sign * fd_step(x.norm());
    let f0 = f(x);
    let n = x.len();
    let mut out = DMatrix::zeros(f0.len(), n);
    let mut xp = x.clone();
    for j in 0..n {
        let orig = xp[j];
        xp[j] = orig + h;
        let fp = f(&xp);
        xp[j] = orig;
        out.set_column(j, &((fp - &f0) / h));
    }
    out
}

/// Largest singular value.
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.nrows() == 1 || m.ncols() == 1 {
        return m.norm();
    }
    m.clone().singular_values().max()
}

/// Smallest singular value of a square or rectangular matrix.
pub fn sigma_min(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().singular_values().min()
}

/// Nearest orthonormal matrix (polar factor `U V^T`).
pub fn polar_orthonormal(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    u * vt
}

/// Orthonormalise the columns of `m` in order. Returns `None` on rank loss.
pub fn gram_schmidt(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let mut out = m.clone();
    for j in 0..m.ncols() {
        let mut v = out.column(j).into_owned();
        // two passes keep the frame orthonormal to rounding
        for _ in 0..2 {
            for i in 0..j {
                let e = out.column(i);
                let d = e.dot(&v);
                v -= e * d;
            }
        }
        let n = v.norm();
        if n < 1e-14 {
            return None;
        }
        out.set_column(j, &(v / n));
    }
    Some(out)
}

/// Orthonormal basis of the orthogonal complement of the column span of `q`
/// (assumed orthonormal) inside R^n.
pub fn orthogonal_complement(q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = q.nrows();
    let proj = DMatrix::identity(n, n) - q * q.transpose();
    let eig = proj.symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let k = n - q.ncols();
    DMatrix::from_fn(n, k, |i, j| eig.eigenvectors[(i, idx[j])])
}

/// Symmetric eigen-decomposition with eigenvalues sorted descending.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let n = m.nrows();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, idx[j])]);
    (vals, vecs)
}

/// Max absolute entry of `m - m^T`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

/// Wrap an angle difference into `(-pi, pi]`.
pub fn wrap_angle(d: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut w = d.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}
