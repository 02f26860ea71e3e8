//! Compressed sparse row storage, dense vector helpers and Matrix Market I/O.

mod csr;
pub mod mtx;
pub mod vector;

pub use csr::{spgemm_normal, CsrMatrix, SymmetryTag};
pub use mtx::{read_matrix_market, write_matrix_market};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid CSR structure: {0}")]
    InvalidStructure(String),
    #[error("entry ({row}, {col}) out of range for a {nrows}x{ncols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    #[error("row offset overflow while building a matrix")]
    OffsetOverflow,
    #[error("matrix is not square ({nrows}x{ncols})")]
    NotSquare { nrows: usize, ncols: usize },
    #[error("matrix is not symmetric: |a[{row},{col}] - a[{col},{row}]| exceeds tolerance")]
    NotSymmetric { row: usize, col: usize },
    #[error("diagonal weight {index} must be finite and positive, got {value}")]
    InvalidWeight { index: usize, value: f64 },
    #[error("matrix market line {line}: {msg}")]
    MatrixMarket { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
