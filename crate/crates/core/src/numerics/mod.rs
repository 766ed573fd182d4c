//! Self-contained dense linear algebra for small systems: complex LU
//! factorization with partial pivoting, determinants, linear solves, and
//! eigenvalues of small real matrices.
//!
//! Everything here is sized for reaction networks and ring couplings with at
//! most a few dozen states; there is deliberately no sparse or large-scale
//! machinery.

mod eig;
mod lu;
mod matrix;

pub use eig::{eig_real, Spectrum, EIG_DIM_CAP};
pub use lu::{determinant, lu_solve, SINGULAR_PIVOT_FLOOR};
pub use matrix::{ComplexMatrix, RealMatrix};

use thiserror::Error;

/// Errors produced by the dense linear-algebra routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NonSquare { rows: usize, cols: usize },
    #[error("matrix shape {rows}x{cols} disagrees with {entries} entries")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        entries: usize,
    },
    #[error("matrix is {dim}x{dim} but right-hand side has length {rhs_len}")]
    RhsLength { dim: usize, rhs_len: usize },
    #[error("non-finite entry at row {row}, column {col}")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("non-finite right-hand side entry at index {index}")]
    NonFiniteRhs { index: usize },
    #[error(
        "singular matrix: pivot magnitude {pivot:.3e} below {floor:.1e} at elimination step {step}"
    )]
    SingularMatrix { step: usize, pivot: f64, floor: f64 },
    #[error(
        "eigenvalue iteration stalled after {iterations} QR sweeps \
         (best subdiagonal residual {best_residual:.3e})"
    )]
    NoConvergence {
        iterations: usize,
        best_residual: f64,
    },
    #[error("matrix dimension {dim} exceeds the small-dense eigensolver cap of {cap}")]
    DimensionTooLarge { dim: usize, cap: usize },
}
