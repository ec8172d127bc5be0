//! Small dense linear-algebra helpers shared by the solvers.
//!
//! Systems are solved by LU with partial pivoting; explicit inverses are
//! formed only where a full inverse matrix is itself needed. All eigenvalue
//! work in production code runs on symmetric matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Iteration budget for the power-method spectral radius estimate.
pub const SPECTRAL_RADIUS_ITERS: usize = 200;
/// Convergence tolerance for the power-method spectral radius estimate.
pub const SPECTRAL_RADIUS_TOL: f64 = 1e-10;

/// Solve `m x = rhs` by LU with partial pivoting.
pub fn solve(m: &DMatrix<f64>, rhs: &DVector<f64>, context: &'static str) -> Result<DVector<f64>> {
    m.clone()
        .lu()
        .solve(rhs)
        .ok_or(Error::SingularSystem(context))
}

/// Explicit inverse, for the few places that need the full matrix.
pub fn inverse(m: &DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>> {
    m.clone()
        .lu()
        .try_inverse()
        .ok_or(Error::SingularSystem(context))
}

/// Estimate the spectral radius of `m` by the power method.
///
/// Uses the geometric mean of the per-step norm growth, which stays stable on
/// matrices whose single-step norm ratios oscillate (e.g. bipartite-like
/// influence patterns). Returns 0 when the iterate collapses to zero, which
/// is exact for nilpotent matrices.
pub fn spectral_radius(m: &DMatrix<f64>, max_iters: usize, tol: f64) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    // Deterministic start with a component along every coordinate.
    let mut z = DVector::from_fn(n, |i, _| 1.0 + (i as f64) * 1e-3);
    z /= z.norm();
    let mut log_growth = 0.0;
    let mut prev_est = f64::NAN;
    for k in 1..=max_iters {
        let w = m * &z;
        let nrm = w.norm();
        if nrm == 0.0 {
            return 0.0;
        }
        log_growth += nrm.ln();
        z = w / nrm;
        let est = (log_growth / k as f64).exp();
        if k > 10 && (est - prev_est).abs() <= tol * est.max(1.0) {
            return est;
        }
        prev_est = est;
    }
    prev_est
}

/// Eigendecomposition of the symmetric part of `m`.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvalues ascending.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    // nalgebra returns eigenvalues unordered; sort ascending.
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_fn(order.len(), |i, _| eig.eigenvalues[order[i]]);
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Symmetric square root of a positive-definite symmetric matrix.
pub fn symmetric_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (values, vectors) = symmetric_eigen(m);
    if values[0] <= 0.0 {
        return Err(Error::NotPositiveDefinite);
    }
    let sqrt_diag = DMatrix::from_diagonal(&values.map(f64::sqrt));
    Ok(&vectors * sqrt_diag * vectors.transpose())
}

/// Largest entry of `|v|`, 0 for the empty vector.
pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, &x| acc.max(x.abs()))
}
