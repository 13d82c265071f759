//! Thin helpers over nalgebra for the Hermitian systems that show up here.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Eigenvalues of a Hermitian matrix, ascending. Only the Hermitian part is used.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let h = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// 2-norm condition number of a Hermitian matrix (infinite when singular or
/// indefinite).
pub fn hermitian_condition(a: &CMatrix) -> f64 {
    let ev = hermitian_eigenvalues(a);
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Largest singular value.
pub fn spectral_norm(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().max()
}

/// Moore-Penrose pseudo-inverse discarding singular values below
/// `rel_cutoff * σ_max`.
pub fn pseudo_inverse(a: &CMatrix, rel_cutoff: f64) -> Result<CMatrix> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = rel_cutoff * smax;
    svd.pseudo_inverse(eps)
        .map_err(|e| Error::SingularMatrix(format!("pseudo-inverse failed: {e}")))
}

/// Cholesky factor of a Hermitian positive-definite matrix.
pub fn cholesky(a: &CMatrix) -> Option<Cholesky<Complex64, Dyn>> {
    Cholesky::new(a.clone())
}
