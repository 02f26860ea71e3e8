//! Incomplete and complete triangular factorizations and the solves that
//! apply them.
//!
//! Every factorization is split into a symbolic phase ([`Symbolic::analyze`])
//! that fixes the sparsity of the factors and a numeric phase
//! ([`Symbolic::factor`]) that fills in values. ILU(0)/IC(0) use the input
//! pattern; complete LU/Cholesky compute the fill with a row-merge pass.
//! Elimination is static (no pivoting): stability comes from matching,
//! scaling and diagonal correction upstream, and a small pivot is reported as
//! an error rather than repaired.

mod schur;
mod symbolic;

pub use schur::{schur_partial_factor, SchurFactor};
pub use symbolic::Symbolic;

use thiserror::Error;

use crate::sparse::{CsrMatrix, SparseError};
use crate::Scalar;

/// Relative pivot guard: a pivot fails when `|u_ii| < PIVOT_TOL · max_j |a_ij|`.
pub const PIVOT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FactorKind {
    Ilu0,
    Ic0,
    LuComplete,
    CholeskyComplete,
}

impl FactorKind {
    pub fn is_cholesky(self) -> bool {
        matches!(self, FactorKind::Ic0 | FactorKind::CholeskyComplete)
    }

    pub fn is_complete(self) -> bool {
        matches!(self, FactorKind::LuComplete | FactorKind::CholeskyComplete)
    }

    pub fn name(self) -> &'static str {
        match self {
            FactorKind::Ilu0 => "ilu0",
            FactorKind::Ic0 => "ic0",
            FactorKind::LuComplete => "lu",
            FactorKind::CholeskyComplete => "cholesky",
        }
    }
}

#[derive(Debug, Error)]
pub enum FactorError {
    #[error("matrix is not square ({nrows}x{ncols})")]
    NotSquare { nrows: usize, ncols: usize },
    #[error("{0} factorization requires a symmetric-tagged matrix")]
    NotSymmetric(&'static str),
    #[error("zero or near-zero pivot {value:e} at row {row}")]
    ZeroPivot { row: usize, value: f64 },
    #[error("nonpositive Cholesky pivot {value:e} at row {row}")]
    NonPositivePivot { row: usize, value: f64 },
    #[error("row {row} is structurally empty")]
    StructurallySingular { row: usize },
    #[error("matrix pattern is not contained in the symbolic factorization")]
    PatternMismatch,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("block {block}: {source}")]
    Block {
        block: usize,
        #[source]
        source: Box<FactorError>,
    },
    #[error(transparent)]
    Sparse(#[from] SparseError),
}

impl FactorError {
    /// True for pivot breakdowns, the failures diagonal correction targets.
    pub fn is_pivot_failure(&self) -> bool {
        match self {
            FactorError::ZeroPivot { .. }
            | FactorError::NonPositivePivot { .. }
            | FactorError::StructurallySingular { .. } => true,
            FactorError::Block { source, .. } => source.is_pivot_failure(),
            _ => false,
        }
    }

    pub fn in_block(self, block: usize) -> Self {
        FactorError::Block {
            block,
            source: Box::new(self),
        }
    }
}

/// Triangular factors plus the row/column permutations and scalings folded
/// into the factored matrix.
///
/// The factored matrix is `F = diag(row_scale) · A[row_perm, col_perm] ·
/// diag(col_scale) ≈ L · U`, so applying the inverse maps a right-hand side
/// through the scaling and permutation before the triangular solves and back
/// afterwards. For LU kinds `l` holds only the strictly lower part (unit
/// diagonal implied); for Cholesky kinds `l` includes its diagonal and
/// `u = lᵀ`.
#[derive(Debug, Clone)]
pub struct FactorBundle<T> {
    pub kind: FactorKind,
    pub l: CsrMatrix<T>,
    pub u: CsrMatrix<T>,
    pub row_perm: Option<Vec<usize>>,
    pub col_perm: Option<Vec<usize>>,
    pub row_scale: Option<Vec<T>>,
    pub col_scale: Option<Vec<T>>,
}

impl<T: Scalar> FactorBundle<T> {
    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn unit_lower(&self) -> bool {
        !self.kind.is_cholesky()
    }

    /// Stored entries of L, counting the unit diagonal for LU kinds.
    pub fn nnz_l(&self) -> usize {
        self.l.nnz() + if self.unit_lower() { self.dim() } else { 0 }
    }

    /// Applies `F⁻¹` in the original ordering.
    pub fn sptrsv(&self, b: &[T]) -> Result<Vec<T>, FactorError> {
        let n = self.dim();
        if b.len() != n {
            return Err(FactorError::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        let mut x = vec![T::zero(); n];
        let mut work = vec![T::zero(); n];
        self.solve_into(b, &mut x, &mut work)?;
        Ok(x)
    }

    /// Allocation-free solve; `work` must have length `dim()`.
    pub fn solve_into(&self, b: &[T], x: &mut [T], work: &mut [T]) -> Result<(), FactorError> {
        let n = self.dim();
        let y = work;
        for i in 0..n {
            let src = self.row_perm.as_ref().map_or(i, |p| p[i]);
            let s = self.row_scale.as_ref().map_or(T::one(), |s| s[i]);
            y[i] = s * b[src];
        }
        // L y = b
        let unit = self.unit_lower();
        for i in 0..n {
            let (cols, vals) = self.l.row(i);
            let mut acc = y[i];
            let mut diag = T::one();
            for (&j, &v) in cols.iter().zip(vals) {
                if j < i {
                    acc -= v * y[j];
                } else if j == i && !unit {
                    diag = v;
                }
            }
            y[i] = acc / diag;
        }
        // U z = y
        for i in (0..n).rev() {
            let (cols, vals) = self.u.row(i);
            let mut acc = y[i];
            let mut diag = T::zero();
            for (&j, &v) in cols.iter().zip(vals) {
                if j > i {
                    acc -= v * y[j];
                } else if j == i {
                    diag = v;
                }
            }
            if diag == T::zero() {
                return Err(FactorError::ZeroPivot { row: i, value: 0.0 });
            }
            y[i] = acc / diag;
        }
        for j in 0..n {
            let s = self.col_scale.as_ref().map_or(T::one(), |s| s[j]);
            let dst = self.col_perm.as_ref().map_or(j, |p| p[j]);
            x[dst] = s * y[j];
        }
        Ok(())
    }

    /// Dense `L·U` (row-major) in the factored ordering, for diagnostics.
    pub fn reassemble_dense(&self) -> Vec<T> {
        let n = self.dim();
        let mut ld = self.l.to_dense();
        if self.unit_lower() {
            for i in 0..n {
                ld[i * n + i] = T::one();
            }
        }
        let ud = self.u.to_dense();
        let mut out = vec![T::zero(); n * n];
        for i in 0..n {
            for k in 0..n {
                let lik = ld[i * n + k];
                if lik == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += lik * ud[k * n + j];
                }
            }
        }
        out
    }
}

pub fn factorize<T: Scalar>(a: &CsrMatrix<T>, kind: FactorKind) -> Result<FactorBundle<T>, FactorError> {
    Symbolic::analyze(a, kind)?.factor(a)
}

/// Zero-fill incomplete LU.
pub fn ilu0<T: Scalar>(a: &CsrMatrix<T>) -> Result<FactorBundle<T>, FactorError> {
    factorize(a, FactorKind::Ilu0)
}

/// Zero-fill incomplete Cholesky; requires a symmetric tag.
pub fn ic0<T: Scalar>(a: &CsrMatrix<T>) -> Result<FactorBundle<T>, FactorError> {
    factorize(a, FactorKind::Ic0)
}

pub fn lu_complete<T: Scalar>(a: &CsrMatrix<T>) -> Result<FactorBundle<T>, FactorError> {
    factorize(a, FactorKind::LuComplete)
}

pub fn cholesky_complete<T: Scalar>(a: &CsrMatrix<T>) -> Result<FactorBundle<T>, FactorError> {
    factorize(a, FactorKind::CholeskyComplete)
}
