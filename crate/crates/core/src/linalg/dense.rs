use nalgebra::DMatrix;

use super::SparseMatrix;

/// Singular values of `k` in descending order, from a dense SVD.
pub fn singular_values(k: &SparseMatrix) -> Vec<f64> {
    let dense = DMatrix::from_row_slice(k.rows(), k.cols(), &k.to_dense());
    let mut s: Vec<f64> = dense.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Spectral condition number `sigma_max / sigma_min`; infinite when singular.
pub fn condition_number(k: &SparseMatrix) -> f64 {
    let s = singular_values(k);
    match (s.first(), s.last()) {
        (Some(&max), Some(&min)) if min > 0.0 => max / min,
        _ => f64::INFINITY,
    }
}
