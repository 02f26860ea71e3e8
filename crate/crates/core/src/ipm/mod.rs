//! Primal-dual path-following for standard-form LP, with every Newton step
//! solved on the normal equations through [`Pipeline`].

mod lp;

use std::collections::HashMap;
use std::time::Instant;

use thiserror::Error;

pub use lp::{format_lp, parse_lp, read_lp, structural_rank, LpProblem};

use crate::pipeline::{Method, Pipeline, PipelineConfig, SolveOutcome};
use crate::precond::{FilterConfig, ReuseAction, ReusePolicy};
use crate::sparse::vector::{dot, norm_inf};
use crate::sparse::{spgemm_normal, CsrMatrix};
use crate::{Error, Scalar};

#[derive(Debug, Error)]
pub enum IpmError {
    #[error("invalid problem dimensions: {0}")]
    Dimensions(String),
    #[error("constraint matrix has structural rank {rank} < {m} rows")]
    RankDeficient { rank: usize, m: usize },
    #[error("iterate left the interior at index {index}")]
    LeftInterior { index: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("lp line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpmState<T> {
    pub x: Vec<T>,
    pub s: Vec<T>,
    pub lambda: Vec<T>,
    pub mu: T,
    pub step: usize,
    pub method: Method,
    pub switched: bool,
}

impl<T: Scalar> IpmState<T> {
    /// `x = s = e`, `λ = 0`.
    pub fn initial<U: Scalar>(prob: &LpProblem<U>, method: Method) -> Self {
        Self {
            x: vec![T::one(); prob.n()],
            s: vec![T::one(); prob.n()],
            lambda: vec![T::zero(); prob.m()],
            mu: T::one(),
            step: 0,
            method,
            switched: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpmConfig {
    pub tol_kkt: f64,
    pub max_steps: usize,
    pub sigma: f64,
    pub step_fraction: f64,
    /// Ranks, factorization, correction and Krylov settings of every solve.
    pub pipeline: PipelineConfig,
    pub filter: Option<FilterConfig>,
    pub reuse: ReusePolicy,
    /// Method of the first step.
    pub method: Method,
    /// Switch Block Jacobi to the Schur method once on solver failure.
    pub switching: bool,
    /// Krylov iteration caps per method, overriding `pipeline.krylov`.
    pub bj_max_iters: Option<usize>,
    pub bbd_max_iters: Option<usize>,
}

impl Default for IpmConfig {
    fn default() -> Self {
        Self {
            tol_kkt: 1e-8,
            max_steps: 100,
            sigma: 0.1,
            step_fraction: 0.995,
            pipeline: PipelineConfig::default(),
            filter: None,
            reuse: ReusePolicy::default(),
            method: Method::BlockJacobi,
            switching: true,
            bj_max_iters: None,
            bbd_max_iters: None,
        }
    }
}

impl IpmConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |msg: String| Err(IpmError::InvalidConfig(msg).into());
        if !(self.tol_kkt > 0.0 && self.tol_kkt.is_finite()) {
            return bad(format!("tolerance {} must be positive", self.tol_kkt));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return bad(format!("centering parameter {} not in (0, 1)", self.sigma));
        }
        if !(self.step_fraction > 0.0 && self.step_fraction < 1.0) {
            return bad(format!("step fraction {} not in (0, 1)", self.step_fraction));
        }
        if self.bj_max_iters == Some(0) || self.bbd_max_iters == Some(0) {
            return bad("iteration caps must be at least 1".into());
        }
        if let Some(f) = &self.filter {
            f.validate()?;
        }
        self.reuse.validate()?;
        self.pipeline.krylov.validate()?;
        Ok(())
    }
}

/// Newton system on the normal equations plus the pieces needed to recover
/// the full direction.
#[derive(Debug, Clone)]
pub struct NormalSystem<T> {
    /// `S_r = B D⁻¹ Bᵀ`, tagged symmetric.
    pub matrix: CsrMatrix<T>,
    pub rhs: Vec<T>,
    /// `D = X⁻¹ S`.
    pub d: Vec<T>,
    /// `r₁ = r_d − X⁻¹ r_c`.
    pub r1: Vec<T>,
    /// `r_c = σμ e − X S e`.
    pub rc: Vec<T>,
}

/// Primal residual `b − B x`.
pub fn primal_residual<T: Scalar>(prob: &LpProblem<T>, x: &[T]) -> Vec<T> {
    let bx = prob.constraints().spmv(x).expect("x has n entries");
    prob.rhs().iter().zip(&bx).map(|(&b, &v)| b - v).collect()
}

/// Dual residual `c − Bᵀ λ − s`.
pub fn dual_residual<T: Scalar>(prob: &LpProblem<T>, lambda: &[T], s: &[T]) -> Vec<T> {
    let btl = prob
        .constraints()
        .transpose()
        .spmv(lambda)
        .expect("lambda has m entries");
    prob.cost()
        .iter()
        .zip(&btl)
        .zip(s)
        .map(|((&c, &v), &si)| c - v - si)
        .collect()
}

/// Forms `S_r` and `rhs = r_p + B D⁻¹ r₁` for the centering target `σμ`.
pub fn assemble_normal_system<T: Scalar>(
    prob: &LpProblem<T>,
    st: &IpmState<T>,
    sigma: f64,
) -> Result<NormalSystem<T>, Error> {
    let n = prob.n();
    for i in 0..n {
        if !(st.x[i] > T::zero() && st.s[i] > T::zero() && st.x[i].is_finite() && st.s[i].is_finite()) {
            return Err(IpmError::LeftInterior { index: i }.into());
        }
    }
    let target = T::of(sigma) * dot(&st.x, &st.s) / T::of(n as f64);
    let d: Vec<T> = st.s.iter().zip(&st.x).map(|(&s, &x)| s / x).collect();
    if let Some(index) = d.iter().position(|v| !(v.is_finite() && *v > T::zero())) {
        return Err(IpmError::LeftInterior { index }.into());
    }
    let dinv: Vec<T> = d.iter().map(|&v| T::one() / v).collect();
    let matrix = spgemm_normal(prob.constraints(), &dinv)?;
    let rp = primal_residual(prob, &st.x);
    let rd = dual_residual(prob, &st.lambda, &st.s);
    let rc: Vec<T> = st.x.iter().zip(&st.s).map(|(&x, &s)| target - x * s).collect();
    let r1: Vec<T> = (0..n).map(|i| rd[i] - rc[i] / st.x[i]).collect();
    let w: Vec<T> = (0..n).map(|i| dinv[i] * r1[i]).collect();
    let bw = prob.constraints().spmv(&w)?;
    let rhs = rp.iter().zip(&bw).map(|(&a, &b)| a + b).collect();
    Ok(NormalSystem { matrix, rhs, d, r1, rc })
}

/// `Δx = D⁻¹ (Bᵀ Δλ − r₁)`, `Δs = X⁻¹ (r_c − S Δx)`.
pub fn recover_dx<T: Scalar>(
    prob: &LpProblem<T>,
    st: &IpmState<T>,
    sys: &NormalSystem<T>,
    dlambda: &[T],
) -> (Vec<T>, Vec<T>) {
    let btl = prob
        .constraints()
        .transpose()
        .spmv(dlambda)
        .expect("dlambda has m entries");
    let n = prob.n();
    let dx: Vec<T> = (0..n).map(|i| (btl[i] - sys.r1[i]) / sys.d[i]).collect();
    let ds: Vec<T> = (0..n).map(|i| (sys.rc[i] - st.s[i] * dx[i]) / st.x[i]).collect();
    (dx, ds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchDecision {
    /// The solve succeeded; keep going.
    Continue,
    /// The method changed; solve the same step again.
    Retry,
    /// Report solver failure.
    Terminate,
}

/// The single-switch state machine: a Block Jacobi failure moves to the Schur
/// method for the rest of the run, a failure after that is terminal.
pub fn switching_step<T>(st: &mut IpmState<T>, solved: bool) -> SwitchDecision {
    if solved {
        return SwitchDecision::Continue;
    }
    if st.switched || st.method == Method::Bbd {
        return SwitchDecision::Terminate;
    }
    st.method = Method::Bbd;
    st.switched = true;
    SwitchDecision::Retry
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recovery {
    /// A reused preconditioner failed; rebuilt from scratch.
    ColdRebuild,
    /// Lowered the filter threshold.
    RelaxTau,
    /// Moved from Block Jacobi to the Schur method.
    Switch,
}

impl Recovery {
    pub fn name(self) -> &'static str {
        match self {
            Recovery::ColdRebuild => "cold_rebuild",
            Recovery::RelaxTau => "relax_tau",
            Recovery::Switch => "switch",
        }
    }
}

/// One linear-solve attempt. Rejected attempts precede the accepted one of
/// the same step and leave the iterate unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct StepLog {
    pub step: usize,
    pub method: Method,
    pub tau: f64,
    pub nnz_l: usize,
    /// `nnz_l` over the unfiltered factor size of the same method; NaN until
    /// that size is known.
    pub nnz_ratio: f64,
    pub iterations: usize,
    /// NaN when the preconditioner could not be built.
    pub relres: f64,
    /// `None` when the preconditioner could not be built.
    pub action: Option<ReuseAction>,
    pub messages: usize,
    pub mu: f64,
    pub primal_inf: f64,
    pub dual_inf: f64,
    /// Smallest entries of `x` and `s` after the attempt.
    pub min_x: f64,
    pub min_s: f64,
    pub accepted: bool,
    /// Taken after a rejected attempt; `None` on accepted attempts and on the
    /// attempt that ends the run.
    pub recovery: Option<Recovery>,
    pub seconds: f64,
}

impl StepLog {
    fn new<T: Scalar>(st: &IpmState<T>, meas: &Measures, method: Method, tau: f64) -> Self {
        Self {
            step: st.step,
            method,
            tau,
            nnz_l: 0,
            nnz_ratio: f64::NAN,
            iterations: 0,
            relres: f64::NAN,
            action: None,
            messages: 0,
            mu: st.mu.as_f64(),
            primal_inf: meas.primal_inf,
            dual_inf: meas.dual_inf,
            min_x: st.x.iter().fold(f64::INFINITY, |m, v| m.min(v.as_f64())),
            min_s: st.s.iter().fold(f64::INFINITY, |m, v| m.min(v.as_f64())),
            accepted: false,
            recovery: None,
            seconds: 0.0,
        }
    }

    fn record(&mut self, out: &SolveOutcome, baseline: Option<usize>) {
        self.nnz_l = out.nnz_l;
        self.nnz_ratio = baseline.map_or(f64::NAN, |b| out.nnz_l as f64 / b.max(1) as f64);
        self.iterations = out.report.iterations;
        self.relres = out.report.final_relres;
        self.action = Some(out.action);
        self.messages = out.messages;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IpmStatus {
    Optimal,
    IterationLimit,
    SolverFailure,
}

impl IpmStatus {
    pub fn name(self) -> &'static str {
        match self {
            IpmStatus::Optimal => "optimal",
            IpmStatus::IterationLimit => "iteration_limit",
            IpmStatus::SolverFailure => "solver_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpmReport {
    pub status: IpmStatus,
    pub steps: usize,
    pub objective: f64,
    pub primal_inf: f64,
    pub dual_inf: f64,
    pub max_complementarity: f64,
    pub log: Vec<StepLog>,
    /// Last linear-solve error or status behind a `SolverFailure`.
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct IpmSolution<T> {
    pub x: Vec<T>,
    pub lambda: Vec<T>,
    pub s: Vec<T>,
    pub report: IpmReport,
}

struct Measures {
    primal_inf: f64,
    dual_inf: f64,
    max_comp: f64,
}

impl Measures {
    fn of<T: Scalar>(prob: &LpProblem<T>, st: &IpmState<T>) -> Self {
        let rp = primal_residual(prob, &st.x);
        let rd = dual_residual(prob, &st.lambda, &st.s);
        Self {
            primal_inf: norm_inf(&rp).as_f64() / (1.0 + norm_inf(prob.rhs()).as_f64()),
            dual_inf: norm_inf(&rd).as_f64() / (1.0 + norm_inf(prob.cost()).as_f64()),
            max_comp: st
                .x
                .iter()
                .zip(&st.s)
                .map(|(&x, &s)| (x * s).as_f64())
                .fold(0.0, f64::max),
        }
    }

    fn worst(&self) -> f64 {
        self.primal_inf.max(self.dual_inf).max(self.max_comp)
    }
}

/// Largest `α ≤ 1` keeping `v + α dv` positive, shortened by `eta` when a
/// bound blocks.
fn step_length<T: Scalar>(v: &[T], dv: &[T], eta: f64) -> T {
    let mut alpha = T::one();
    for (&vi, &di) in v.iter().zip(dv) {
        if di < T::zero() {
            alpha = alpha.min(T::of(eta) * (-vi / di));
        }
    }
    alpha
}

/// Runs the path-following loop until the scaled residuals and every `xᵢsᵢ`
/// drop below `tol_kkt`.
pub fn ipm_solve<T: Scalar>(prob: &LpProblem<T>, cfg: &IpmConfig) -> Result<IpmSolution<T>, Error> {
    let mut pipeline = Pipeline::new(cfg.pipeline.clone())?;
    ipm_solve_in(prob, cfg, &mut pipeline)
}

/// [`ipm_solve`] on a caller-owned pipeline, whose rank group keeps the
/// message statistics and trace afterwards. `cfg.pipeline` is not consulted.
pub fn ipm_solve_in<T: Scalar>(
    prob: &LpProblem<T>,
    cfg: &IpmConfig,
    pipeline: &mut Pipeline<T>,
) -> Result<IpmSolution<T>, Error> {
    cfg.validate()?;
    let base_krylov = pipeline.config().krylov;
    let mut st = IpmState::initial(prob, cfg.method);
    st.mu = dot(&st.x, &st.s) / T::of(prob.n() as f64);
    let mut log = Vec::new();
    let mut baselines: HashMap<Method, usize> = HashMap::new();
    let mut tau_ceiling = f64::INFINITY;
    let mut failure = None;
    let status = loop {
        let meas = Measures::of(prob, &st);
        if meas.worst() <= cfg.tol_kkt {
            break IpmStatus::Optimal;
        }
        if st.step >= cfg.max_steps {
            break IpmStatus::IterationLimit;
        }
        let started = Instant::now();
        let sys = assemble_normal_system(prob, &st, cfg.sigma)?;
        let mut tau = cfg.filter.as_ref().map_or(0.0, |f| f.tau_at(st.step)).min(tau_ceiling);
        let mut cold_tried = false;
        let solved = loop {
            let mut krylov = base_krylov;
            let cap = match st.method {
                Method::BlockJacobi => cfg.bj_max_iters,
                Method::Bbd => cfg.bbd_max_iters,
            };
            if let Some(c) = cap {
                krylov.max_iters = c;
            }
            pipeline.set_krylov(krylov)?;
            let mut entry = StepLog::new(&st, &meas, st.method, tau);
            entry.step += 1;
            let attempt = pipeline.solve(st.method, &sys.matrix, &sys.rhs, None, tau, &cfg.reuse);
            let reused = match &attempt {
                Ok((_, out)) if out.report.converged() => break Some(attempt.expect("checked")),
                Ok((_, out)) => {
                    failure = Some(format!(
                        "{} solve ended with {}",
                        st.method.name(),
                        out.report.status.name()
                    ));
                    entry.record(out, baselines.get(&out.method).copied());
                    out.action.is_reuse()
                }
                Err(e) => {
                    failure = Some(format!("{} solve failed: {e}", st.method.name()));
                    false
                }
            };
            log::debug!("step {}: {}", st.step, failure.as_deref().unwrap_or(""));
            entry.seconds = started.elapsed().as_secs_f64();
            if reused && !cold_tried {
                pipeline.invalidate();
                cold_tried = true;
                entry.recovery = Some(Recovery::ColdRebuild);
                log.push(entry);
                continue;
            }
            if tau > 0.0 {
                tau = cfg.filter.as_ref().map_or(0.0, |f| f.relax(tau));
                tau_ceiling = tau;
                entry.recovery = Some(Recovery::RelaxTau);
                log.push(entry);
                continue;
            }
            let decision = if cfg.switching {
                switching_step(&mut st, false)
            } else {
                SwitchDecision::Terminate
            };
            match decision {
                SwitchDecision::Retry => {
                    log::info!("step {}: switching to {}", st.step, st.method.name());
                    entry.recovery = Some(Recovery::Switch);
                    log.push(entry);
                    tau = cfg.filter.as_ref().map_or(0.0, |f| f.tau_at(st.step));
                    tau_ceiling = f64::INFINITY;
                    cold_tried = false;
                }
                _ => {
                    log.push(entry);
                    break None;
                }
            }
        };
        let Some((dlambda, out)) = solved else {
            break IpmStatus::SolverFailure;
        };
        failure = None;
        let baseline = match baselines.get(&out.method) {
            Some(&b) => b,
            None => {
                let b = if out.tau > 0.0 {
                    pipeline.build_nnz_l(out.method, &sys.matrix, 0.0).unwrap_or(out.nnz_l)
                } else {
                    out.nnz_l
                };
                *baselines.entry(out.method).or_insert(b)
            }
        };
        let (dx, ds) = recover_dx(prob, &st, &sys, &dlambda);
        let ap = step_length(&st.x, &dx, cfg.step_fraction);
        let ad = step_length(&st.s, &ds, cfg.step_fraction);
        for i in 0..prob.n() {
            st.x[i] += ap * dx[i];
            st.s[i] += ad * ds[i];
        }
        for (l, d) in st.lambda.iter_mut().zip(&dlambda) {
            *l += ad * *d;
        }
        st.mu = dot(&st.x, &st.s) / T::of(prob.n() as f64);
        st.step += 1;
        let after = Measures::of(prob, &st);
        let mut entry = StepLog::new(&st, &after, out.method, out.tau);
        entry.record(&out, Some(baseline));
        entry.accepted = true;
        entry.seconds = started.elapsed().as_secs_f64();
        log.push(entry);
    };
    let meas = Measures::of(prob, &st);
    Ok(IpmSolution {
        report: IpmReport {
            status,
            steps: st.step,
            objective: prob.objective(&st.x).as_f64(),
            primal_inf: meas.primal_inf,
            dual_inf: meas.dual_inf,
            max_complementarity: meas.max_comp,
            log,
            failure: if status == IpmStatus::SolverFailure {
                failure
            } else {
                None
            },
        },
        x: st.x,
        lambda: st.lambda,
        s: st.s,
    })
}
