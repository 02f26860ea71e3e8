use thiserror::Error;

use crate::decomp::DecompError;
use crate::factor::FactorError;
use crate::ipm::IpmError;
use crate::krylov::KrylovError;
use crate::precond::PrecondError;
use crate::runtime::RuntimeError;
use crate::sparse::SparseError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sparse: {0}")]
    Sparse(#[from] SparseError),
    #[error("factor: {0}")]
    Factor(#[from] FactorError),
    #[error("krylov: {0}")]
    Krylov(#[from] KrylovError),
    #[error("precond: {0}")]
    Precond(#[from] PrecondError),
    #[error("decomp: {0}")]
    Decomp(#[from] DecompError),
    #[error("runtime: {0}")]
    Runtime(#[from] RuntimeError),
    #[error("ipm: {0}")]
    Ipm(#[from] IpmError),
}
