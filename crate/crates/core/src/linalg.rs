//! Small helpers around the standard complex structure of R^2n.

use nalgebra::{DMatrix, DVector};

/// The standard complex structure J, acting blockwise as (x, y) -> (-y, x).
pub fn standard_j(dim: usize) -> DMatrix<f64> {
    assert!(dim.is_multiple_of(2), "symplectic dimension must be even");
    let mut j = DMatrix::zeros(dim, dim);
    for b in 0..dim / 2 {
        j[(2 * b, 2 * b + 1)] = -1.0;
        j[(2 * b + 1, 2 * b)] = 1.0;
    }
    j
}

/// Applies J to a vector without materializing the matrix.
pub fn apply_j(v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(v.len());
    for b in 0..v.len() / 2 {
        out[2 * b] = -v[2 * b + 1];
        out[2 * b + 1] = v[2 * b];
    }
    out
}

/// Applies J^T = -J = J^{-1}.
pub fn apply_j_inv(v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(v.len());
    for b in 0..v.len() / 2 {
        out[2 * b] = v[2 * b + 1];
        out[2 * b + 1] = -v[2 * b];
    }
    out
}

/// J M, computed rowwise.
pub fn j_times(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    let mut out = DMatrix::zeros(rows, cols);
    for b in 0..rows / 2 {
        for c in 0..cols {
            out[(2 * b, c)] = -m[(2 * b + 1, c)];
            out[(2 * b + 1, c)] = m[(2 * b, c)];
        }
    }
    out
}

/// M J, computed columnwise.
pub fn times_j(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    let mut out = DMatrix::zeros(rows, cols);
    for b in 0..cols / 2 {
        for r in 0..rows {
            out[(r, 2 * b)] = m[(r, 2 * b + 1)];
            out[(r, 2 * b + 1)] = -m[(r, 2 * b)];
        }
    }
    out
}

/// Block-diagonal matrix of 2x2 rotations by the given angles.
pub fn block_rotation(angles: &[f64]) -> DMatrix<f64> {
    let dim = 2 * angles.len();
    let mut m = DMatrix::zeros(dim, dim);
    for (b, &theta) in angles.iter().enumerate() {
        let (s, c) = theta.sin_cos();
        m[(2 * b, 2 * b)] = c;
        m[(2 * b, 2 * b + 1)] = -s;
        m[(2 * b + 1, 2 * b)] = s;
        m[(2 * b + 1, 2 * b + 1)] = c;
    }
    m
}

/// Frobenius norm of Gamma^T J Gamma - J.
pub fn symplectic_defect(gamma: &DMatrix<f64>) -> f64 {
    let j = standard_j(gamma.nrows());
    (gamma.transpose() * &j * gamma - j).norm()
}

/// Singular values of m, descending.
pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    m.clone().svd(false, false).singular_values
}

/// Dimension of the numerical kernel of m: singular values below
/// `rel_tol * sigma_max` (or below `rel_tol` when m is tiny in norm).
pub fn kernel_dimension(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = singular_values(m);
    let scale = sv[0].max(1.0);
    sv.iter().filter(|&&s| s < rel_tol * scale).count()
}

/// Cholesky-based positive definiteness test.
pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    nalgebra::Cholesky::new(m.clone()).is_some()
}
