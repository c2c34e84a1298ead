//! Thin wrappers over the LAPACK eigensolvers with the crate's conventions.
//!
//! Eigenvalues come back ascending, eigenvectors as columns. Real
//! eigenvectors are sign-normalised so that their first component with
//! magnitude above [`SIGN_TOL`] is positive.

use ndarray::{Array1, Array2, ArrayView2, Axis, ShapeBuilder};
use ndarray_linalg::{Eigh, EigValsh, UPLO};
use num_complex::Complex64;

use crate::Result;

/// Threshold for the "first significant component" in the sign convention.
pub const SIGN_TOL: f64 = 1e-8;

/// `(m + mᵗ) / 2`.
pub fn symmetrize(m: ArrayView2<f64>) -> Array2<f64> {
    (&m + &m.t()) * 0.5
}

/// Make the first significant component of `v` positive.
pub fn fix_sign(mut v: ndarray::ArrayViewMut1<f64>) {
    if let Some(&first) = v.iter().find(|x| x.abs() > SIGN_TOL) {
        if first < 0.0 {
            v.mapv_inplace(|x| -x);
        }
    }
}

/// Symmetric eigendecomposition with sign-fixed eigenvector columns.
pub fn eigh_sym(m: ArrayView2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let sym = symmetrize(m);
    let (vals, mut vecs) = sym.eigh(UPLO::Lower)?;
    for col in vecs.axis_iter_mut(Axis(1)) {
        fix_sign(col);
    }
    Ok((vals, vecs))
}

/// Eigenvalues only, ascending.
pub fn eigvalsh_sym(m: ArrayView2<f64>) -> Result<Array1<f64>> {
    Ok(symmetrize(m).eigvalsh(UPLO::Lower)?)
}

/// `(m + m†) / 2`.
pub fn hermitize(m: ArrayView2<Complex64>) -> Array2<Complex64> {
    let adj = m.t().mapv(|z| z.conj());
    (&m + &adj).mapv(|z| z * 0.5)
}

/// Hermitian eigendecomposition, eigenvalues ascending, eigenvectors as columns.
///
/// The input is copied into column-major order first: for row-major complex
/// input the LAPACK wrapper sees the transpose, i.e. the complex conjugate,
/// and returns conjugated eigenvectors.
pub fn eigh_herm(m: ArrayView2<Complex64>) -> Result<(Array1<f64>, Array2<Complex64>)> {
    let h = hermitize(m);
    let mut f = Array2::<Complex64>::zeros(h.dim().f());
    f.assign(&h);
    Ok(f.eigh(UPLO::Lower)?)
}

/// Largest absolute entry.
pub fn max_abs<D: ndarray::Dimension>(m: &ndarray::Array<f64, D>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Conjugate transpose.
pub fn adjoint(m: ArrayView2<Complex64>) -> Array2<Complex64> {
    m.t().mapv(|z| z.conj())
}

/// Hilbert-Schmidt inner product `Tr(a† b)`.
pub fn hs_inner(a: ArrayView2<Complex64>, b: ArrayView2<Complex64>) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Cluster ascending values into runs whose consecutive gaps are at most `tol`.
pub fn cluster_ascending(vals: &[f64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=vals.len() {
        if i == vals.len() || vals[i] - vals[i - 1] > tol {
            if start < i {
                out.push(start..i);
            }
            start = i;
        }
    }
    out
}
