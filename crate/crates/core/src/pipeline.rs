//! Distributed solves: a Krylov method over the row-partitioned operator,
//! preconditioned by Block Jacobi or by the bordered block Schur method, with
//! preconditioners kept in a reuse cache between calls.

use std::ops::Range;

use crate::decomp::{nested_dissection_bbd, partition_rows, BbdStructure, RowPartition};
use crate::factor::{FactorBundle, FactorKind};
use crate::krylov::{solve_right_preconditioned, KrylovConfig, LinearOperator, Preconditioner, SolveReport};
use crate::precond::{
    diagonal_correction, sparse_filter, PrecondCache, PrecondError, Recipe, RecipeSymbolic, Refactorable, ReuseAction,
    ReusePolicy,
};
use crate::runtime::{bbd_apply, bbd_factor, bj_apply, dist_spmv, BbdFactors, DistVector, RankGroup, Schedule};
use crate::sparse::{CsrMatrix, SymmetryTag};
use crate::{Error, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    BlockJacobi,
    Bbd,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::BlockJacobi => "bj",
            Method::Bbd => "bbd",
        }
    }

    /// ILU(0) per block for Block Jacobi, complete LU for the Schur method.
    pub fn default_kind(self) -> FactorKind {
        match self {
            Method::BlockJacobi => FactorKind::Ilu0,
            Method::Bbd => FactorKind::LuComplete,
        }
    }
}

fn lu_counterpart(kind: FactorKind) -> FactorKind {
    match kind {
        FactorKind::Ic0 => FactorKind::Ilu0,
        FactorKind::CholeskyComplete => FactorKind::LuComplete,
        k => k,
    }
}

fn tag_block(e: Error, block: usize) -> Error {
    match e {
        Error::Factor(f) => Error::Factor(f.in_block(block)),
        e => e,
    }
}

/// Per-block recipes over a row partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BjBuilder {
    pub nranks: usize,
    pub recipe: Recipe,
}

#[derive(Debug, Clone)]
pub struct BjSymbolic<T> {
    pub blocks: Vec<RecipeSymbolic<T>>,
}

#[derive(Debug, Clone)]
pub struct BjFactors<T> {
    pub factors: Vec<FactorBundle<T>>,
}

impl<T: Scalar> BjFactors<T> {
    pub fn nnz_l(&self) -> usize {
        self.factors.iter().map(FactorBundle::nnz_l).sum()
    }
}

impl<T: Scalar> Refactorable<T> for BjBuilder {
    type Symbolic = BjSymbolic<T>;
    type Numeric = BjFactors<T>;

    fn analyze(&self, a: &CsrMatrix<T>) -> Result<BjSymbolic<T>, Error> {
        let part = partition_rows(a, self.nranks)?;
        let blocks = part
            .diag_blocks
            .iter()
            .enumerate()
            .map(|(k, d)| self.recipe.analyze(d).map_err(|e| tag_block(e, k)))
            .collect::<Result<_, _>>()?;
        Ok(BjSymbolic { blocks })
    }

    fn factor(&self, sym: &mut BjSymbolic<T>, a: &CsrMatrix<T>) -> Result<BjFactors<T>, Error> {
        let part = partition_rows(a, self.nranks)?;
        let factors = part
            .diag_blocks
            .iter()
            .zip(sym.blocks.iter_mut())
            .enumerate()
            .map(|(k, (d, s))| self.recipe.factor(s, d).map_err(|e| tag_block(e, k)))
            .collect::<Result<_, _>>()?;
        Ok(BjFactors { factors })
    }
}

/// Dissection ordering computed once, then filtering, correction and the
/// distributed Schur factorization on every refactor.
#[derive(Debug, Clone, Copy)]
pub struct BbdBuilder<'g> {
    pub group: &'g RankGroup,
    pub kind: FactorKind,
    pub tau: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BbdOrdering {
    pub perm: Vec<usize>,
    pub block_ranges: Vec<Range<usize>>,
}

#[derive(Debug, Clone)]
pub struct BbdPrecond<T> {
    pub structure: BbdStructure<T>,
    pub factors: BbdFactors<T>,
}

impl<T: Scalar> BbdPrecond<T> {
    pub fn nnz_l(&self) -> usize {
        self.factors.nnz_l()
    }
}

impl BbdBuilder<'_> {
    fn prepare<T: Scalar>(&self, a: &CsrMatrix<T>) -> Result<CsrMatrix<T>, PrecondError> {
        let mut m = match self.tau.filter(|&t| t > 0.0) {
            Some(t) => sparse_filter(a, t)?,
            None => a.clone(),
        };
        if let Some(d) = self.delta {
            m = diagonal_correction(&m, d)?;
        }
        Ok(m)
    }
}

impl<T: Scalar> Refactorable<T> for BbdBuilder<'_> {
    type Symbolic = BbdOrdering;
    type Numeric = BbdPrecond<T>;

    fn analyze(&self, a: &CsrMatrix<T>) -> Result<BbdOrdering, Error> {
        let s = nested_dissection_bbd(a, self.group.nranks())?;
        Ok(BbdOrdering {
            perm: s.perm,
            block_ranges: s.block_ranges,
        })
    }

    fn factor(&self, sym: &mut BbdOrdering, a: &CsrMatrix<T>) -> Result<BbdPrecond<T>, Error> {
        let m = self.prepare(a)?;
        let structure = BbdStructure::from_parts(&m, sym.perm.clone(), sym.block_ranges.clone())?;
        let kind = if self.kind.is_cholesky() && !m.symmetry().is_symmetric() {
            lu_counterpart(self.kind)
        } else {
            self.kind
        };
        let factors = match bbd_factor(self.group, &structure, kind) {
            Err(Error::Factor(e)) if e.is_pivot_failure() && kind.is_cholesky() => {
                log::debug!("{} failed ({e}); switching to LU", kind.name());
                bbd_factor(self.group, &structure, lu_counterpart(kind))?
            }
            r => r?,
        };
        Ok(BbdPrecond { structure, factors })
    }
}

/// `y = A x` through the distributed product.
pub struct DistOperator<'a, T> {
    pub group: &'a RankGroup,
    pub partition: &'a RowPartition<T>,
    pub symmetry: SymmetryTag,
}

impl<T: Scalar> LinearOperator<T> for DistOperator<'_, T> {
    fn dim(&self) -> usize {
        self.partition.dim()
    }

    fn apply(&self, x: &[T], y: &mut [T]) -> Result<(), Error> {
        let xd = DistVector::scatter_rows(self.partition, x)?;
        let yd = dist_spmv(self.group, self.partition, &xd)?;
        let mut k = 0;
        for seg in &yd.segments {
            y[k..k + seg.len()].copy_from_slice(seg);
            k += seg.len();
        }
        Ok(())
    }

    fn symmetry(&self) -> SymmetryTag {
        self.symmetry
    }
}

pub struct BjApply<'a, T> {
    pub group: &'a RankGroup,
    pub partition: &'a RowPartition<T>,
    pub factors: &'a BjFactors<T>,
}

impl<T: Scalar> Preconditioner<T> for BjApply<'_, T> {
    fn dim(&self) -> usize {
        self.partition.dim()
    }

    fn apply_inverse(&self, r: &[T], z: &mut [T]) -> Result<(), Error> {
        let rd = DistVector::scatter_rows(self.partition, r)?;
        let zd = bj_apply(self.group, self.partition, &self.factors.factors, &rd)?;
        z.copy_from_slice(&zd.gather());
        Ok(())
    }
}

pub struct BbdApply<'a, T> {
    pub group: &'a RankGroup,
    pub precond: &'a BbdPrecond<T>,
}

impl<T: Scalar> Preconditioner<T> for BbdApply<'_, T> {
    fn dim(&self) -> usize {
        self.precond.structure.dim()
    }

    fn apply_inverse(&self, r: &[T], z: &mut [T]) -> Result<(), Error> {
        let s = &self.precond.structure;
        let rd = DistVector::scatter_bbd(s, r)?;
        let zd = bbd_apply(self.group, s, &self.precond.factors, &rd)?;
        z.copy_from_slice(&zd.gather_bbd(s));
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub nranks: usize,
    /// Factorization per block; `None` takes the method's default.
    pub factor: Option<FactorKind>,
    /// Matching and scaling inside each Block Jacobi block.
    pub mc64: bool,
    pub delta: Option<f64>,
    pub krylov: KrylovConfig,
    pub schedule: Schedule,
    pub trace: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            nranks: 1,
            factor: None,
            mc64: false,
            delta: Some(1e-12),
            krylov: KrylovConfig::default(),
            schedule: Schedule::Threaded,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub method: Method,
    pub tau: f64,
    pub report: SolveReport,
    pub action: ReuseAction,
    pub nnz_l: usize,
    /// Messages sent during this call, factorization included.
    pub messages: usize,
}

/// A rank group plus one preconditioner cache per method.
pub struct Pipeline<T: Scalar> {
    cfg: PipelineConfig,
    group: RankGroup,
    bj: PrecondCache<BjSymbolic<T>, BjFactors<T>>,
    bj_tau: f64,
    bbd: PrecondCache<BbdOrdering, BbdPrecond<T>>,
    bbd_tau: f64,
}

impl<T: Scalar> Pipeline<T> {
    pub fn new(cfg: PipelineConfig) -> Result<Self, Error> {
        cfg.krylov.validate()?;
        if let Some(d) = cfg.delta {
            crate::precond::CorrectionConfig { delta: d }.validate()?;
        }
        let group = RankGroup::new(cfg.nranks)?
            .with_schedule(cfg.schedule)
            .with_trace(cfg.trace);
        Ok(Self {
            cfg,
            group,
            bj: PrecondCache::new(),
            bj_tau: 0.0,
            bbd: PrecondCache::new(),
            bbd_tau: 0.0,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn group(&self) -> &RankGroup {
        &self.group
    }

    pub fn kind(&self, method: Method) -> FactorKind {
        self.cfg.factor.unwrap_or(method.default_kind())
    }

    /// Replaces the Krylov settings used by later solves.
    pub fn set_krylov(&mut self, krylov: KrylovConfig) -> Result<(), Error> {
        krylov.validate()?;
        self.cfg.krylov = krylov;
        Ok(())
    }

    /// Drops every cached preconditioner.
    pub fn invalidate(&mut self) {
        self.bj.invalidate();
        self.bbd.invalidate();
    }

    fn bj_builder(&self, tau: f64) -> BjBuilder {
        BjBuilder {
            nranks: self.cfg.nranks,
            recipe: Recipe {
                kind: self.kind(Method::BlockJacobi),
                mc64: self.cfg.mc64,
                tau: Some(tau),
                delta: self.cfg.delta,
            },
        }
    }

    fn bbd_builder(&self, tau: f64) -> BbdBuilder<'_> {
        BbdBuilder {
            group: &self.group,
            kind: self.kind(Method::Bbd),
            tau: Some(tau),
            delta: self.cfg.delta,
        }
    }

    /// Builds the preconditioner once outside the cache and returns its
    /// factor size.
    pub fn build_nnz_l(&self, method: Method, a: &CsrMatrix<T>, tau: f64) -> Result<usize, Error> {
        Ok(match method {
            Method::BlockJacobi => {
                let b = self.bj_builder(tau);
                let mut s = b.analyze(a)?;
                b.factor(&mut s, a)?.nnz_l()
            }
            Method::Bbd => {
                let b = self.bbd_builder(tau);
                let mut s = b.analyze(a)?;
                b.factor(&mut s, a)?.nnz_l()
            }
        })
    }

    /// Solves `A x = b` with the given method and filter threshold. A change
    /// of threshold since the previous call empties that method's cache.
    pub fn solve(
        &mut self,
        method: Method,
        a: &CsrMatrix<T>,
        b: &[T],
        x0: Option<&[T]>,
        tau: f64,
        policy: &ReusePolicy,
    ) -> Result<(Vec<T>, SolveOutcome), Error> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(PrecondError::InvalidTau(tau).into());
        }
        let partition = partition_rows(a, self.cfg.nranks)?;
        let op = DistOperator {
            group: &self.group,
            partition: &partition,
            symmetry: a.symmetry(),
        };
        let zeros = vec![T::zero(); a.nrows()];
        let x0 = x0.unwrap_or(&zeros);
        let before = self.group.message_count();
        let (x, report, action, nnz_l) = match method {
            Method::BlockJacobi => {
                if self.bj_tau != tau {
                    self.bj.invalidate();
                    self.bj_tau = tau;
                }
                let builder = self.bj_builder(tau);
                let (f, action) = self.bj.reuse_step(&builder, a, policy)?;
                let m = BjApply {
                    group: &self.group,
                    partition: &partition,
                    factors: f,
                };
                let (x, rep) = solve_right_preconditioned(&op, &m, b, x0, &self.cfg.krylov)?;
                (x, rep, action, f.nnz_l())
            }
            Method::Bbd => {
                if self.bbd_tau != tau {
                    self.bbd.invalidate();
                    self.bbd_tau = tau;
                }
                let builder = BbdBuilder {
                    group: &self.group,
                    kind: self.cfg.factor.unwrap_or(Method::Bbd.default_kind()),
                    tau: Some(tau),
                    delta: self.cfg.delta,
                };
                let (p, action) = self.bbd.reuse_step(&builder, a, policy)?;
                let m = BbdApply {
                    group: &self.group,
                    precond: p,
                };
                let (x, rep) = solve_right_preconditioned(&op, &m, b, x0, &self.cfg.krylov)?;
                (x, rep, action, p.nnz_l())
            }
        };
        Ok((
            x,
            SolveOutcome {
                method,
                tau,
                report,
                action,
                nnz_l,
                messages: self.group.message_count() - before,
            },
        ))
    }
}
