//! Right-preconditioned Krylov solvers: CG, BiCGSTAB and restarted GCR(m).
//!
//! All three solve `A M⁻¹ y = b` and carry `x = M⁻¹ y` directly, so the
//! residual they minimize or track is the true residual of `A x = b`.
//! Convergence is accepted only on a recomputed residual `‖b − A x‖₂ / ‖b‖₂`.

use thiserror::Error;

use crate::factor::FactorBundle;
use crate::sparse::vector::{all_finite, axpy, dot, norm2};
use crate::sparse::{CsrMatrix, SymmetryTag};
use crate::{Error, Scalar};

/// Inner-product pivot guard for BiCGSTAB and CG, and the minimum search
/// direction norm for GCR.
pub const BREAKDOWN_GUARD: f64 = 1e-300;

pub trait LinearOperator<T: Scalar> {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[T], y: &mut [T]) -> Result<(), Error>;
    fn symmetry(&self) -> SymmetryTag {
        SymmetryTag::General
    }
}

pub trait Preconditioner<T: Scalar> {
    fn dim(&self) -> usize;
    fn apply_inverse(&self, r: &[T], z: &mut [T]) -> Result<(), Error>;
}

impl<T: Scalar> LinearOperator<T> for CsrMatrix<T> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[T], y: &mut [T]) -> Result<(), Error> {
        self.spmv_into(x, y);
        Ok(())
    }

    fn symmetry(&self) -> SymmetryTag {
        CsrMatrix::symmetry(self)
    }
}

impl<T: Scalar> Preconditioner<T> for FactorBundle<T> {
    fn dim(&self) -> usize {
        FactorBundle::dim(self)
    }

    fn apply_inverse(&self, r: &[T], z: &mut [T]) -> Result<(), Error> {
        let mut work = vec![T::zero(); r.len()];
        self.solve_into(r, z, &mut work)?;
        Ok(())
    }
}

/// `M = I`.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl<T: Scalar> Preconditioner<T> for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply_inverse(&self, r: &[T], z: &mut [T]) -> Result<(), Error> {
        z.copy_from_slice(r);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KrylovMethod {
    Cg,
    Bicgstab,
    Gcr,
}

impl KrylovMethod {
    pub fn name(self) -> &'static str {
        match self {
            KrylovMethod::Cg => "cg",
            KrylovMethod::Bicgstab => "bicgstab",
            KrylovMethod::Gcr => "gcr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovConfig {
    pub method: KrylovMethod,
    /// GCR restart period `m`.
    pub restart_m: usize,
    pub rel_tol: f64,
    pub max_iters: usize,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self {
            method: KrylovMethod::Gcr,
            restart_m: 30,
            rel_tol: 1e-8,
            max_iters: 500,
        }
    }
}

impl KrylovConfig {
    pub fn validate(&self) -> Result<(), KrylovError> {
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(KrylovError::InvalidConfig(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        if self.restart_m == 0 {
            return Err(KrylovError::InvalidConfig("restart_m must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Converged,
    MaxIters,
    Breakdown,
    NonFinite,
}

impl SolveStatus {
    pub fn name(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIters => "max_iters",
            SolveStatus::Breakdown => "breakdown",
            SolveStatus::NonFinite => "nonfinite",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub iterations: usize,
    /// `‖b − A x‖₂ / ‖b‖₂` at exit (zero for a zero right-hand side).
    pub final_relres: f64,
    /// True relative residual before the first iteration and after each one.
    pub residual_history: Vec<f64>,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

#[derive(Debug, Error)]
pub enum KrylovError {
    #[error("invalid Krylov configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("CG requires an operator tagged symmetric")]
    NotSymmetric,
    #[error("right-hand side contains non-finite values")]
    NonFiniteRhs,
}

struct Workspace<'a, T: Scalar, A: ?Sized, M: ?Sized> {
    op: &'a A,
    m: &'a M,
    b: &'a [T],
    bnorm: T,
    cfg: &'a KrylovConfig,
    history: Vec<f64>,
    scratch: Vec<T>,
}

enum Check {
    Done(SolveStatus),
    Continue,
}

impl<'a, T, A, M> Workspace<'a, T, A, M>
where
    T: Scalar,
    A: LinearOperator<T> + ?Sized,
    M: Preconditioner<T> + ?Sized,
{
    fn true_relres(&mut self, x: &[T]) -> Result<T, Error> {
        self.op.apply(x, &mut self.scratch)?;
        let mut acc = T::zero();
        for (bi, ai) in self.b.iter().zip(&self.scratch) {
            let d = *bi - *ai;
            acc += d * d;
        }
        Ok(acc.sqrt() / self.bnorm)
    }

    /// Records the true residual of `x` and decides whether to stop.
    fn check(&mut self, x: &[T], iterations: usize) -> Result<Check, Error> {
        if !all_finite(x) {
            self.history.push(f64::NAN);
            return Ok(Check::Done(SolveStatus::NonFinite));
        }
        let rr = self.true_relres(x)?;
        self.history.push(rr.as_f64());
        if !rr.is_finite() {
            return Ok(Check::Done(SolveStatus::NonFinite));
        }
        if rr.as_f64() <= self.cfg.rel_tol {
            return Ok(Check::Done(SolveStatus::Converged));
        }
        if iterations >= self.cfg.max_iters {
            return Ok(Check::Done(SolveStatus::MaxIters));
        }
        Ok(Check::Continue)
    }

    fn finish(self, status: SolveStatus, iterations: usize) -> SolveReport {
        let final_relres = self.history.last().copied().unwrap_or(0.0);
        SolveReport {
            status,
            iterations,
            final_relres,
            residual_history: self.history,
        }
    }
}

/// Solves `A x = b` with right preconditioning, dispatching on `cfg.method`.
pub fn solve_right_preconditioned<T, A, M>(
    op: &A,
    m: &M,
    b: &[T],
    x0: &[T],
    cfg: &KrylovConfig,
) -> Result<(Vec<T>, SolveReport), Error>
where
    T: Scalar,
    A: LinearOperator<T> + ?Sized,
    M: Preconditioner<T> + ?Sized,
{
    cfg.validate()?;
    let n = op.dim();
    for (what, found) in [
        ("rhs", b.len()),
        ("initial guess", x0.len()),
        ("preconditioner", m.dim()),
    ] {
        if found != n {
            return Err(KrylovError::DimensionMismatch {
                what,
                expected: n,
                found,
            }
            .into());
        }
    }
    if !all_finite(b) {
        return Err(KrylovError::NonFiniteRhs.into());
    }
    if cfg.method == KrylovMethod::Cg && !op.symmetry().is_symmetric() {
        return Err(KrylovError::NotSymmetric.into());
    }
    let bnorm = norm2(b);
    if bnorm == T::zero() {
        return Ok((
            vec![T::zero(); n],
            SolveReport {
                status: SolveStatus::Converged,
                iterations: 0,
                final_relres: 0.0,
                residual_history: vec![0.0],
            },
        ));
    }
    let mut ws = Workspace {
        op,
        m,
        b,
        bnorm,
        cfg,
        history: Vec::new(),
        scratch: vec![T::zero(); n],
    };
    let mut x = x0.to_vec();
    if let Check::Done(status) = ws.check(&x, 0)? {
        return Ok((x, ws.finish(status, 0)));
    }
    let (status, iters) = match cfg.method {
        KrylovMethod::Cg => cg(&mut ws, &mut x)?,
        KrylovMethod::Bicgstab => bicgstab(&mut ws, &mut x)?,
        KrylovMethod::Gcr => gcr(&mut ws, &mut x, cfg.restart_m)?,
    };
    Ok((x, ws.finish(status, iters)))
}

/// Restarted GCR(m): at most `m` direction pairs are kept, then discarded.
pub fn gcr_restarted<T, A, M>(
    op: &A,
    m: &M,
    b: &[T],
    x0: &[T],
    restart_m: usize,
    rel_tol: f64,
    max_iters: usize,
) -> Result<(Vec<T>, SolveReport), Error>
where
    T: Scalar,
    A: LinearOperator<T> + ?Sized,
    M: Preconditioner<T> + ?Sized,
{
    let cfg = KrylovConfig {
        method: KrylovMethod::Gcr,
        restart_m,
        rel_tol,
        max_iters,
    };
    solve_right_preconditioned(op, m, b, x0, &cfg)
}

fn residual<T, A>(op: &A, b: &[T], x: &[T]) -> Result<Vec<T>, Error>
where
    T: Scalar,
    A: LinearOperator<T> + ?Sized,
{
    let mut r = vec![T::zero(); b.len()];
    op.apply(x, &mut r)?;
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    Ok(r)
}

fn cg<T, A, M>(ws: &mut Workspace<'_, T, A, M>, x: &mut [T]) -> Result<(SolveStatus, usize), Error>
where
    T: Scalar,
    A: LinearOperator<T> + ?Sized,
    M: Preconditioner<T> + ?Sized,
{
    let guard = T::guard(BREAKDOWN_GUARD);
    let n = x.len();
    let mut r = residual(ws.op, ws.b, x)?;
    let mut z = vec![T::zero(); n];
    ws.m.apply_inverse(&r, &mut z)?;
    let mut p = z.clone();
    let mut q = vec![T::zero(); n];
    let mut rz = dot(&r, &z);
    let mut it = 0;
    loop {
        ws.op.apply(&p, &mut q)?;
        let pq = dot(&p, &q);
        if pq.abs() < guard || !pq.is_finite() {
            return Ok((SolveStatus::Breakdown, it));
        }
        let alpha = rz / pq;
        axpy(alpha, &p, x);
        axpy(-alpha, &q, &mut r);
        it += 1;
        if let Check::Done(s) = ws.check(x, it)? {
            return Ok((s, it));
        }
        ws.m.apply_inverse(&r, &mut z)?;
        let rz_new = dot(&r, &z);
        if rz.abs() < guard {
            return Ok((SolveStatus::Breakdown, it));
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, &zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
}

fn bicgstab<T, A, M>(ws: &mut Workspace<'_, T, A, M>, x: &mut [T]) -> Result<(SolveStatus, usize), Error>
where
    T: Scalar,
    A: LinearOperator<T> + ?Sized,
    M: Preconditioner<T> + ?Sized,
{
    let guard = T::guard(BREAKDOWN_GUARD);
    let n = x.len();
    let mut r = residual(ws.op, ws.b, x)?;
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (T::one(), T::one(), T::one());
    let mut v = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    let mut p_hat = vec![T::zero(); n];
    let mut s = vec![T::zero(); n];
    let mut s_hat = vec![T::zero(); n];
    let mut t = vec![T::zero(); n];
    let mut x_half = vec![T::zero(); n];
    let mut it = 0;
    loop {
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < guard || !rho_new.is_finite() {
            return Ok((SolveStatus::Breakdown, it));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        ws.m.apply_inverse(&p, &mut p_hat)?;
        ws.op.apply(&p_hat, &mut v)?;
        let rv = dot(&r_hat, &v);
        if rv.abs() < guard || !rv.is_finite() {
            return Ok((SolveStatus::Breakdown, it));
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
            x_half[i] = x[i] + alpha * p_hat[i];
        }
        it += 1;
        // half step: accept if already converged
        if all_finite(&x_half) && ws.true_relres(&x_half)?.as_f64() <= ws.cfg.rel_tol {
            x.copy_from_slice(&x_half);
            ws.check(x, it)?;
            return Ok((SolveStatus::Converged, it));
        }
        ws.m.apply_inverse(&s, &mut s_hat)?;
        ws.op.apply(&s_hat, &mut t)?;
        let tt = dot(&t, &t);
        if tt < guard || !tt.is_finite() {
            x.copy_from_slice(&x_half);
            let st = match ws.check(x, it)? {
                Check::Done(st) => st,
                Check::Continue => SolveStatus::Breakdown,
            };
            return Ok((st, it));
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] = x_half[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        if let Check::Done(st) = ws.check(x, it)? {
            return Ok((st, it));
        }
        if omega.abs() < guard {
            return Ok((SolveStatus::Breakdown, it));
        }
    }
}

fn gcr<T, A, M>(ws: &mut Workspace<'_, T, A, M>, x: &mut [T], restart_m: usize) -> Result<(SolveStatus, usize), Error>
where
    T: Scalar,
    A: LinearOperator<T> + ?Sized,
    M: Preconditioner<T> + ?Sized,
{
    let guard = T::guard(BREAKDOWN_GUARD);
    let n = x.len();
    let mut r = residual(ws.op, ws.b, x)?;
    // preconditioned directions and their orthonormal images under A
    let mut dirs: Vec<Vec<T>> = Vec::with_capacity(restart_m);
    let mut images: Vec<Vec<T>> = Vec::with_capacity(restart_m);
    let mut it = 0;
    loop {
        let mut p = vec![T::zero(); n];
        ws.m.apply_inverse(&r, &mut p)?;
        let mut q = vec![T::zero(); n];
        ws.op.apply(&p, &mut q)?;
        for (pj, qj) in dirs.iter().zip(&images) {
            let beta = dot(&q, qj);
            axpy(-beta, qj, &mut q);
            axpy(-beta, pj, &mut p);
        }
        let nq = norm2(&q);
        if nq < guard || !nq.is_finite() {
            return Ok((SolveStatus::Breakdown, it));
        }
        let inv = T::one() / nq;
        q.iter_mut().for_each(|v| *v *= inv);
        p.iter_mut().for_each(|v| *v *= inv);
        let alpha = dot(&r, &q);
        axpy(alpha, &p, x);
        axpy(-alpha, &q, &mut r);
        it += 1;
        if let Check::Done(s) = ws.check(x, it)? {
            return Ok((s, it));
        }
        if dirs.len() + 1 >= restart_m {
            dirs.clear();
            images.clear();
        } else {
            dirs.push(p);
            images.push(q);
        }
    }
}
