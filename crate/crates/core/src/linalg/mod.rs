//! Sparse storage and Krylov solvers for the tangent systems.

mod dense;
mod solvers;
mod sparse;

pub use dense::{condition_number, singular_values};
pub use solvers::{bicgstab_solve, cg_solve, solve, SolveReport, SolverKind, BREAKDOWN_THRESHOLD, SYMMETRY_TOLERANCE};
pub use sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("dimension mismatch: matrix is {rows}x{cols}, vector has {len} entries")]
    DimensionMismatch { rows: usize, cols: usize, len: usize },
    #[error("matrix entry ({row}, {col}) is outside a {rows}x{cols} matrix")]
    OutOfBounds { row: usize, col: usize, rows: usize, cols: usize },
    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("conjugate gradients need a symmetric matrix")]
    NotSymmetric,
    #[error("BiCGSTAB breakdown at iteration {iteration}: {quantity} = {value:e}")]
    Breakdown { iteration: usize, quantity: &'static str, value: f64 },
    #[error("{solver} did not converge in {iterations} iterations (residual {residual:e}, target {target:e})")]
    NotConverged { solver: &'static str, iterations: usize, residual: f64, target: f64 },
    #[error("invalid solver tolerance {0}")]
    InvalidTolerance(f64),
}
