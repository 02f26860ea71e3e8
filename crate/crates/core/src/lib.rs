//! Sparse preconditioned Krylov solvers for the linear systems of interior
//! point methods, with Block Jacobi and bordered block Schur preconditioners
//! running over a simulated group of message-passing ranks.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common double-precision case.

pub mod decomp;
pub mod error;
pub mod factor;
pub mod ipm;
pub mod krylov;
pub mod pipeline;
pub mod precond;
pub mod runtime;
pub mod scalar;
pub mod sparse;
pub mod synthetic;

#[cfg(test)]
mod testutil;

pub use error::Error;
pub use scalar::Scalar;

pub type CsrMatrix64 = sparse::CsrMatrix<f64>;
pub type CsrMatrix32 = sparse::CsrMatrix<f32>;
pub type FactorBundle64 = factor::FactorBundle<f64>;
pub type LpProblem64 = ipm::LpProblem<f64>;
pub type Pipeline64 = pipeline::Pipeline<f64>;
