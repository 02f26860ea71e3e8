use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use ipm_linsolve::decomp::nested_dissection_bbd;
use ipm_linsolve::factor::FactorKind;
use ipm_linsolve::ipm::{ipm_solve_in, read_lp, IpmConfig, IpmStatus};
use ipm_linsolve::krylov::{KrylovConfig, KrylovMethod};
use ipm_linsolve::pipeline::{Method, Pipeline, PipelineConfig};
use ipm_linsolve::precond::{FilterConfig, ReuseMode, ReusePolicy};
use ipm_linsolve::runtime::Schedule;
use ipm_linsolve::sparse::mtx::read_matrix_market;
use ipm_linsolve::sparse::vector::rel_diff;
use ipm_linsolve::CsrMatrix64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::report::{render, Cell, Format, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Solve,
    Ipm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Bj,
    Bbd,
    /// Block Jacobi with a single switch to bbd on failure (ipm only).
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReuseArg {
    None,
    Symbolic,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FactorArg {
    Ilu0,
    Ic0,
    Lu,
    Cholesky,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KrylovArg {
    Gcr,
    Cg,
    Bicgstab,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScheduleArg {
    Threaded,
    Serial,
    /// Serialized ranks in an order drawn from `--seed`.
    Shuffled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleArg {
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RhsArg {
    /// `b = A e`.
    Ones,
    /// Uniform in [-1, 1) from `--seed`.
    Random,
}

/// One value holding the whole list, not a repeated flag.
type TauSchedule = Vec<(usize, f64)>;

fn parse_schedule(s: &str) -> Result<TauSchedule, String> {
    s.split(',')
        .map(|item| {
            let (step, tau) = item
                .split_once(':')
                .ok_or_else(|| format!("`{item}` is not step:tau"))?;
            let step = step.trim().parse().map_err(|_| format!("bad step `{step}`"))?;
            let tau = tau.trim().parse().map_err(|_| format!("bad tau `{tau}`"))?;
            Ok((step, tau))
        })
        .collect()
}

/// Sparse linear solves and interior point runs over simulated ranks.
#[derive(Debug, Clone, Parser)]
#[command(name = "ipm-linsolve", version)]
pub struct Cli {
    #[arg(long, value_enum, default_value_t = Mode::Solve)]
    pub mode: Mode,
    /// Matrix Market file (solve mode).
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// LP file (ipm mode).
    #[arg(long)]
    pub lp: Option<PathBuf>,
    /// Defaults to bj in solve mode and auto in ipm mode.
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long, default_value_t = 1)]
    pub nranks: usize,
    /// Number of bbd blocks; one rank per block.
    #[arg(long)]
    pub nblocks: Option<usize>,
    /// Filter threshold; 0 keeps every entry.
    #[arg(long, default_value_t = 1e-3)]
    pub tau: f64,
    /// Per-step thresholds, e.g. `0:0,10:1e-3`.
    #[arg(long, value_parser = parse_schedule)]
    pub tau_schedule: Option<TauSchedule>,
    /// Diagonal correction; negative disables it.
    #[arg(long, default_value_t = 1e-12, allow_negative_numbers = true)]
    pub delta: f64,
    /// Relative residual tolerance of each linear solve.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Scaled KKT tolerance of the interior point loop.
    #[arg(long, default_value_t = 1e-8)]
    pub ipm_tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 100)]
    pub max_steps: usize,
    #[arg(long, value_enum, default_value_t = ReuseArg::None)]
    pub reuse: ReuseArg,
    /// Numeric refresh period under `--reuse both`.
    #[arg(long, default_value_t = 5)]
    pub reuse_period: usize,
    /// Steps after which a cached preconditioner is rebuilt regardless.
    #[arg(long, default_value_t = 50)]
    pub reuse_cap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub output: Format,
    /// Writes the message trace (`step src dst tag bytes`).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Also solves densely (n <= 500) and reports the discrepancy.
    #[arg(long, value_enum)]
    pub oracle: Option<OracleArg>,
    /// Defaults to ilu0 for bj and lu for bbd.
    #[arg(long, value_enum)]
    pub factor: Option<FactorArg>,
    #[arg(long, value_enum, default_value_t = KrylovArg::Gcr)]
    pub krylov: KrylovArg,
    /// GCR restart length.
    #[arg(long, default_value_t = 30)]
    pub restart: usize,
    /// Matching and scaling inside each bj block.
    #[arg(long)]
    pub mc64: bool,
    #[arg(long, value_enum, default_value_t = ScheduleArg::Threaded)]
    pub schedule: ScheduleArg,
    /// Krylov iteration cap for bj solves only.
    #[arg(long)]
    pub bj_max_iters: Option<usize>,
    /// Krylov iteration cap for bbd solves only.
    #[arg(long)]
    pub bbd_max_iters: Option<usize>,
    /// Adds wall-clock columns (not reproducible).
    #[arg(long)]
    pub timings: bool,
    /// Writes the bbd block layout and permutation of the matrix.
    #[arg(long)]
    pub dump_decomp: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = RhsArg::Ones)]
    pub rhs: RhsArg,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("input: {0}")]
    Input(String),
    #[error("solver failure: {0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Input(_) => 1,
            CliError::Solver(_) => 2,
        }
    }
}

/// Rendered output and exit code of a completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl Cli {
    fn kind(&self) -> Option<FactorKind> {
        self.factor.map(|f| match f {
            FactorArg::Ilu0 => FactorKind::Ilu0,
            FactorArg::Ic0 => FactorKind::Ic0,
            FactorArg::Lu => FactorKind::LuComplete,
            FactorArg::Cholesky => FactorKind::CholeskyComplete,
        })
    }

    fn ranks(&self, method: MethodArg) -> Result<usize, CliError> {
        match (method, self.nblocks) {
            (MethodArg::Bj, Some(_)) => Err(usage("--nblocks applies to bbd and auto")),
            (_, Some(b)) if self.nranks != 1 && self.nranks != b => {
                Err(usage(format!("--nblocks {b} conflicts with --nranks {}", self.nranks)))
            }
            (_, Some(b)) => Ok(b),
            (_, None) => Ok(self.nranks),
        }
    }

    fn pipeline_config(&self, nranks: usize) -> Result<PipelineConfig, CliError> {
        if nranks == 0 {
            return Err(usage("need at least one rank"));
        }
        let krylov = KrylovConfig {
            method: match self.krylov {
                KrylovArg::Gcr => KrylovMethod::Gcr,
                KrylovArg::Cg => KrylovMethod::Cg,
                KrylovArg::Bicgstab => KrylovMethod::Bicgstab,
            },
            restart_m: self.restart,
            rel_tol: self.tol,
            max_iters: self.max_iters,
        };
        krylov.validate().map_err(|e| usage(e.to_string()))?;
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(usage(format!("--tau must be finite and nonnegative, got {}", self.tau)));
        }
        Ok(PipelineConfig {
            nranks,
            factor: self.kind(),
            mc64: self.mc64,
            delta: (self.delta >= 0.0).then_some(self.delta),
            krylov,
            schedule: match self.schedule {
                ScheduleArg::Threaded => Schedule::Threaded,
                ScheduleArg::Serial => Schedule::Serial,
                ScheduleArg::Shuffled => Schedule::Shuffled(self.seed),
            },
            trace: self.trace.is_some(),
        })
    }

    fn filter(&self) -> FilterConfig {
        FilterConfig {
            tau: self.tau,
            schedule: self.tau_schedule.clone().unwrap_or_default(),
        }
    }
}

/// Parses nothing and prints nothing: turns a configuration into output.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    match cli.mode {
        Mode::Solve => run_solve(cli),
        Mode::Ipm => run_ipm(cli),
    }
}

fn dense_oracle(a: &CsrMatrix64, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.nrows();
    let m = nalgebra::DMatrix::from_row_slice(n, n, &a.to_dense());
    m.lu()
        .solve(&nalgebra::DVector::from_column_slice(b))
        .map(|x| x.as_slice().to_vec())
}

const ORACLE_LIMIT: usize = 500;

pub fn run_solve(cli: &Cli) -> Result<Outcome, CliError> {
    let method = match cli.method.unwrap_or(MethodArg::Bj) {
        MethodArg::Auto => return Err(usage("--method auto needs --mode ipm")),
        m => m,
    };
    let path = cli.matrix.as_ref().ok_or_else(|| usage("solve mode needs --matrix"))?;
    let a: CsrMatrix64 = read_matrix_market(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if !a.is_square() {
        return Err(CliError::Input(format!(
            "matrix is {}x{}, expected square",
            a.nrows(),
            a.ncols()
        )));
    }
    let nranks = cli.ranks(method)?;
    let cfg = cli.pipeline_config(nranks)?;
    let n = a.nrows();
    let b = match cli.rhs {
        RhsArg::Ones => a.spmv(&vec![1.0; n]).expect("square"),
        RhsArg::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
        }
    };
    if let Some(p) = &cli.dump_decomp {
        let s = nested_dissection_bbd(&a, nranks).map_err(|e| CliError::Input(format!("decomp: {e}")))?;
        s.write_sidecar(p)
            .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
    }
    let method = match method {
        MethodArg::Bbd => Method::Bbd,
        _ => Method::BlockJacobi,
    };
    let mut pipeline = Pipeline::new(cfg).map_err(|e| usage(e.to_string()))?;
    let tau = cli.filter().tau_at(0);
    let policy = ReusePolicy::default();
    let started = Instant::now();
    let result = pipeline.solve(method, &a, &b, None, tau, &policy);
    let seconds = started.elapsed().as_secs_f64();
    write_trace(cli, &pipeline)?;
    let (x, out) = result.map_err(|e| CliError::Solver(e.to_string()))?;
    let mut cols = vec![
        "method", "nranks", "factor", "krylov", "tau", "iters", "relres", "status", "messages", "nnz_L",
    ];
    if cli.oracle.is_some() {
        cols.push("oracle_err");
    }
    if cli.timings {
        cols.push("time_s");
    }
    let mut t = Table::new("solve", &cols);
    let mut row: Vec<Cell> = vec![
        method.name().into(),
        nranks.into(),
        pipeline.kind(method).name().into(),
        pipeline.config().krylov.method.name().into(),
        tau.into(),
        out.report.iterations.into(),
        out.report.final_relres.into(),
        out.report.status.name().into(),
        out.messages.into(),
        out.nnz_l.into(),
    ];
    if cli.oracle.is_some() {
        row.push(if n > ORACLE_LIMIT {
            log::warn!("dense oracle skipped for n = {n} > {ORACLE_LIMIT}");
            "skipped".into()
        } else {
            match dense_oracle(&a, &b) {
                Some(xd) => rel_diff(&x, &xd).into(),
                None => "singular".into(),
            }
        });
    }
    if cli.timings {
        row.push(seconds.into());
    }
    t.push(row);
    Ok(Outcome {
        stdout: render(&[t], cli.output),
        code: if out.report.converged() { 0 } else { 2 },
    })
}

fn write_trace(cli: &Cli, pipeline: &Pipeline<f64>) -> Result<(), CliError> {
    if let Some(p) = &cli.trace {
        pipeline
            .group()
            .write_trace(p)
            .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

pub fn run_ipm(cli: &Cli) -> Result<Outcome, CliError> {
    let path = cli.lp.as_ref().ok_or_else(|| usage("ipm mode needs --lp"))?;
    let prob = read_lp::<f64, _>(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let method_arg = cli.method.unwrap_or(MethodArg::Auto);
    let nranks = cli.ranks(method_arg)?;
    let pcfg = cli.pipeline_config(nranks)?;
    let filter = cli.filter();
    filter.validate().map_err(|e| usage(e.to_string()))?;
    let reuse = ReusePolicy {
        mode: match cli.reuse {
            ReuseArg::None => ReuseMode::None,
            ReuseArg::Symbolic => ReuseMode::ReuseSymbolic,
            ReuseArg::Both => ReuseMode::ReuseBoth,
        },
        numeric_refresh_period: cli.reuse_period,
        stale_iteration_cap: cli.reuse_cap,
    };
    let cfg = IpmConfig {
        tol_kkt: cli.ipm_tol,
        max_steps: cli.max_steps,
        pipeline: pcfg.clone(),
        filter: (filter.tau > 0.0 || !filter.schedule.is_empty()).then_some(filter),
        reuse,
        method: if method_arg == MethodArg::Bbd {
            Method::Bbd
        } else {
            Method::BlockJacobi
        },
        switching: method_arg == MethodArg::Auto,
        bj_max_iters: cli.bj_max_iters,
        bbd_max_iters: cli.bbd_max_iters,
        ..IpmConfig::default()
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let mut pipeline = Pipeline::new(pcfg).map_err(|e| usage(e.to_string()))?;
    let result = ipm_solve_in(&prob, &cfg, &mut pipeline);
    write_trace(cli, &pipeline)?;
    let sol = result.map_err(|e| CliError::Solver(e.to_string()))?;
    let rep = &sol.report;
    let mut cols = vec![
        "step",
        "method",
        "tau",
        "nnz_L",
        "nnz_ratio",
        "iters",
        "relres",
        "reuse",
        "messages",
        "mu",
        "event",
    ];
    if cli.timings {
        cols.push("time_s");
    }
    let mut steps = Table::new("step", &cols);
    for l in &rep.log {
        let event = match (l.accepted, l.recovery) {
            (true, _) => "-",
            (false, Some(r)) => r.name(),
            (false, None) => "failed",
        };
        let mut row: Vec<Cell> = vec![
            l.step.into(),
            l.method.name().into(),
            l.tau.into(),
            l.nnz_l.into(),
            l.nnz_ratio.into(),
            l.iterations.into(),
            l.relres.into(),
            l.action.map_or("-", |a| a.name()).into(),
            l.messages.into(),
            l.mu.into(),
            event.into(),
        ];
        if cli.timings {
            row.push(l.seconds.into());
        }
        steps.push(row);
    }
    let mut summary = Table::new(
        "summary",
        &[
            "status",
            "objective",
            "steps",
            "primal_inf",
            "dual_inf",
            "max_xs",
            "messages",
        ],
    );
    summary.push(vec![
        rep.status.name().into(),
        rep.objective.into(),
        rep.steps.into(),
        rep.primal_inf.into(),
        rep.dual_inf.into(),
        rep.max_complementarity.into(),
        pipeline.group().message_count().into(),
    ]);
    if let Some(f) = &rep.failure {
        log::error!("{f}");
    }
    Ok(Outcome {
        stdout: render(&[steps, summary], cli.output),
        code: if rep.status == IpmStatus::Optimal { 0 } else { 2 },
    })
}
