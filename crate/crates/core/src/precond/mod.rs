//! Preconditioner construction: threshold filtering, maximum-product matching
//! with scaling, diagonal correction, and reuse of factorizations across a
//! sequence of related matrices.

mod correction;
mod filter;
mod mc64;
mod reuse;

pub use correction::{build_corrected_preconditioner, diagonal_correction, CorrectionConfig};
pub use filter::{build_filtered_preconditioner, sparse_filter, FilterConfig, FilteredBuild};
pub use mc64::{mc64_match_scale, ScalingResult};
pub use reuse::{PrecondCache, Recipe, RecipeSymbolic, Refactorable, ReuseAction, ReuseMode, ReusePolicy};

use thiserror::Error;

use crate::factor::FactorError;

#[derive(Debug, Error)]
pub enum PrecondError {
    #[error("matrix is not square ({nrows}x{ncols})")]
    NotSquare { nrows: usize, ncols: usize },
    #[error("{0} requires a symmetric-tagged matrix")]
    NotSymmetric(&'static str),
    #[error("matrix is structurally singular: no perfect matching ({matched} of {n} columns matched)")]
    StructurallySingular { matched: usize, n: usize },
    #[error("invalid filter threshold {0}")]
    InvalidTau(f64),
    #[error("invalid filter schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid correction delta {0}")]
    InvalidDelta(f64),
    #[error("invalid reuse policy: {0}")]
    InvalidPolicy(String),
    #[error("both Cholesky ({cholesky}) and LU ({lu}) factorizations failed")]
    BothFactorizationsFailed { cholesky: FactorError, lu: FactorError },
}
