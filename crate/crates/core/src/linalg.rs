//! Small dense helpers shared across modules.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use crate::{CMatrix, CVector};

/// `x^T y` without conjugation.
pub fn dot_t(x: &CVector, y: &CVector) -> Complex64 {
    x.iter().zip(y.iter()).map(|(a, b)| a * b).sum()
}

/// `A^T x` without materializing the transpose.
pub fn tr_mul(a: &CMatrix, x: &CVector) -> CVector {
    CVector::from_fn(a.ncols(), |j, _| a.column(j).iter().zip(x.iter()).map(|(u, v)| u * v).sum())
}

/// `a b^T` (no conjugation).
pub fn outer(a: &CVector, b: &CVector) -> CMatrix {
    CMatrix::from_fn(a.len(), b.len(), |i, k| a[i] * b[k])
}

/// Singular values in descending order.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Largest squared singular value.
pub fn spectral_norm_sq(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    if a.nrows() == 1 || a.ncols() == 1 {
        return a.norm_squared();
    }
    if a.nrows() == 2 && a.ncols() == 2 {
        // eigenvalues of the 2x2 Gram matrix in closed form
        let g = a.adjoint() * a;
        let tr = g[(0, 0)].re + g[(1, 1)].re;
        let det = (g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)]).re;
        let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
        return 0.5 * tr + disc;
    }
    let g = if a.nrows() <= a.ncols() { a * a.adjoint() } else { a.adjoint() * a };
    let eig = SymmetricEigen::new(g);
    eig.eigenvalues.iter().copied().fold(0.0, f64::max)
}

/// Ratio of the second to the first singular value (0 for rank <= 1).
pub fn rank_one_ratio(a: &CMatrix) -> f64 {
    let s = singular_values(a);
    match s.as_slice() {
        [] | [_] => 0.0,
        [s1, s2, ..] if *s1 > 0.0 => s2 / s1,
        _ => 0.0,
    }
}

/// Entrywise unit-modulus check.
pub fn is_unit_modulus(v: &CVector, tol: f64) -> bool {
    v.iter().all(|z| (z.norm() - 1.0).abs() <= tol)
}
