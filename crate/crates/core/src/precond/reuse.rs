use super::{diagonal_correction, mc64_match_scale, sparse_filter, PrecondError};
use crate::factor::{FactorBundle, FactorKind, Symbolic};
use crate::sparse::CsrMatrix;
use crate::{Error, Scalar};

/// A preconditioner construction split into a pattern-only phase and a
/// value phase, so the first can be kept across matrices sharing a pattern.
pub trait Refactorable<T: Scalar> {
    type Symbolic;
    type Numeric;

    fn analyze(&self, a: &CsrMatrix<T>) -> Result<Self::Symbolic, Error>;

    /// May update `sym`, for instance to record a factorization fallback.
    fn factor(&self, sym: &mut Self::Symbolic, a: &CsrMatrix<T>) -> Result<Self::Numeric, Error>;
}

/// Single-matrix preconditioner: optional matching and scaling, optional
/// filtering, optional diagonal correction, then one factorization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recipe {
    pub kind: FactorKind,
    pub mc64: bool,
    /// Filter threshold; `None` or zero keeps every entry.
    pub tau: Option<f64>,
    pub delta: Option<f64>,
}

impl Recipe {
    pub fn plain(kind: FactorKind) -> Self {
        Self {
            kind,
            mc64: false,
            tau: None,
            delta: None,
        }
    }

    pub fn build<T: Scalar>(&self, a: &CsrMatrix<T>) -> Result<FactorBundle<T>, Error> {
        let mut sym = self.analyze(a)?;
        self.factor(&mut sym, a)
    }

    fn prepare<T: Scalar>(&self, a: &CsrMatrix<T>, scaling: Option<&Scaling<T>>) -> Result<CsrMatrix<T>, Error> {
        let mut m = match scaling {
            Some(s) => {
                let id: Vec<usize> = (0..a.ncols()).collect();
                a.permute(&s.row_perm, &id)?
                    .scale(&s.row_scale, &s.col_scale)
                    .into_general()
            }
            None => a.clone(),
        };
        if let Some(tau) = self.tau.filter(|&t| t > 0.0) {
            m = sparse_filter(&m, tau)?;
        }
        if let Some(delta) = self.delta {
            m = diagonal_correction(&m, delta)?;
        }
        Ok(m)
    }
}

#[derive(Debug, Clone)]
struct Scaling<T> {
    row_perm: Vec<usize>,
    row_scale: Vec<T>,
    col_scale: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct RecipeSymbolic<T> {
    scaling: Option<Scaling<T>>,
    symbolic: Symbolic,
    lu_fallback: bool,
}

impl<T: Scalar> RecipeSymbolic<T> {
    pub fn symbolic(&self) -> &Symbolic {
        &self.symbolic
    }

    /// A Cholesky-kind recipe was switched to the LU counterpart.
    pub fn lu_fallback(&self) -> bool {
        self.lu_fallback
    }
}

fn lu_counterpart(kind: FactorKind) -> FactorKind {
    match kind {
        FactorKind::Ic0 => FactorKind::Ilu0,
        FactorKind::CholeskyComplete => FactorKind::LuComplete,
        k => k,
    }
}

impl<T: Scalar> Refactorable<T> for Recipe {
    type Symbolic = RecipeSymbolic<T>;
    type Numeric = FactorBundle<T>;

    fn analyze(&self, a: &CsrMatrix<T>) -> Result<RecipeSymbolic<T>, Error> {
        if !a.is_square() {
            return Err(PrecondError::NotSquare {
                nrows: a.nrows(),
                ncols: a.ncols(),
            }
            .into());
        }
        let scaling = if self.mc64 {
            let r = mc64_match_scale(a)?;
            Some(Scaling {
                row_perm: r.row_perm,
                row_scale: r.row_scale,
                col_scale: r.col_scale,
            })
        } else {
            None
        };
        let m = self.prepare(a, scaling.as_ref())?;
        let mut kind = self.kind;
        let mut lu_fallback = false;
        if kind.is_cholesky() && !m.symmetry().is_symmetric() {
            kind = lu_counterpart(kind);
            lu_fallback = true;
        }
        Ok(RecipeSymbolic {
            scaling,
            symbolic: Symbolic::analyze(&m, kind)?,
            lu_fallback,
        })
    }

    fn factor(&self, sym: &mut RecipeSymbolic<T>, a: &CsrMatrix<T>) -> Result<FactorBundle<T>, Error> {
        let m = self.prepare(a, sym.scaling.as_ref())?;
        let mut bundle = match sym.symbolic.factor(&m) {
            Ok(b) => b,
            Err(e) if e.is_pivot_failure() && sym.symbolic.kind().is_cholesky() => {
                log::debug!("{} failed ({e}); switching to LU", sym.symbolic.kind().name());
                sym.symbolic = Symbolic::analyze(&m, lu_counterpart(sym.symbolic.kind()))?;
                sym.lu_fallback = true;
                sym.symbolic.factor(&m)?
            }
            Err(e) => return Err(e.into()),
        };
        if let Some(s) = &sym.scaling {
            bundle.row_perm = Some(s.row_perm.clone());
            bundle.row_scale = Some(s.row_scale.clone());
            bundle.col_scale = Some(s.col_scale.clone());
        }
        Ok(bundle)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ReuseMode {
    #[default]
    None,
    ReuseSymbolic,
    ReuseBoth,
}

impl ReuseMode {
    pub fn name(self) -> &'static str {
        match self {
            ReuseMode::None => "none",
            ReuseMode::ReuseSymbolic => "symbolic",
            ReuseMode::ReuseBoth => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReusePolicy {
    pub mode: ReuseMode,
    /// With `ReuseBoth`, the numeric factors are refreshed every this many
    /// steps.
    pub numeric_refresh_period: usize,
    /// Steps after which everything is rebuilt regardless of mode.
    pub stale_iteration_cap: usize,
}

impl Default for ReusePolicy {
    fn default() -> Self {
        Self {
            mode: ReuseMode::None,
            numeric_refresh_period: 5,
            stale_iteration_cap: 50,
        }
    }
}

impl ReusePolicy {
    pub fn validate(&self) -> Result<(), PrecondError> {
        if self.numeric_refresh_period == 0 {
            return Err(PrecondError::InvalidPolicy(
                "numeric_refresh_period must be at least 1".into(),
            ));
        }
        if self.stale_iteration_cap == 0 {
            return Err(PrecondError::InvalidPolicy(
                "stale_iteration_cap must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReuseAction {
    ReusedBoth,
    RefactoredNumeric,
    RebuiltAll,
}

impl ReuseAction {
    pub fn name(self) -> &'static str {
        match self {
            ReuseAction::ReusedBoth => "reused_both",
            ReuseAction::RefactoredNumeric => "refactored_numeric",
            ReuseAction::RebuiltAll => "rebuilt_all",
        }
    }

    pub fn is_reuse(self) -> bool {
        self != ReuseAction::RebuiltAll
    }
}

/// Symbolic and numeric state kept between steps.
#[derive(Debug, Clone)]
pub struct PrecondCache<S, N> {
    last_pattern_hash: Option<u64>,
    symbolic: Option<S>,
    numeric: Option<N>,
    age_steps: usize,
    numeric_age: usize,
}

impl<S, N> Default for PrecondCache<S, N> {
    fn default() -> Self {
        Self {
            last_pattern_hash: None,
            symbolic: None,
            numeric: None,
            age_steps: 0,
            numeric_age: 0,
        }
    }
}

impl<S, N> PrecondCache<S, N> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Steps since the last full rebuild.
    pub fn age_steps(&self) -> usize {
        self.age_steps
    }

    pub fn symbolic(&self) -> Option<&S> {
        self.symbolic.as_ref()
    }

    pub fn numeric(&self) -> Option<&N> {
        self.numeric.as_ref()
    }

    /// Forces the next step to rebuild from scratch.
    pub fn invalidate(&mut self) {
        *self = Self::default();
    }

    /// Returns the preconditioner for `a` and how it was obtained.
    pub fn reuse_step<T, B>(
        &mut self,
        builder: &B,
        a: &CsrMatrix<T>,
        policy: &ReusePolicy,
    ) -> Result<(&N, ReuseAction), Error>
    where
        T: Scalar,
        B: Refactorable<T, Symbolic = S, Numeric = N>,
    {
        policy.validate()?;
        let hash = a.pattern_hash();
        let warm = self.symbolic.is_some() && self.numeric.is_some() && self.last_pattern_hash == Some(hash);
        let action = if !warm || policy.mode == ReuseMode::None || self.age_steps + 1 >= policy.stale_iteration_cap {
            ReuseAction::RebuiltAll
        } else if policy.mode == ReuseMode::ReuseBoth && self.numeric_age + 1 < policy.numeric_refresh_period {
            ReuseAction::ReusedBoth
        } else {
            ReuseAction::RefactoredNumeric
        };
        match action {
            ReuseAction::ReusedBoth => {
                self.age_steps += 1;
                self.numeric_age += 1;
            }
            ReuseAction::RefactoredNumeric => {
                let sym = self.symbolic.as_mut().expect("warm cache");
                match builder.factor(sym, a) {
                    Ok(n) => {
                        self.numeric = Some(n);
                        self.age_steps += 1;
                        self.numeric_age = 0;
                    }
                    Err(Error::Factor(e)) if e.is_pattern_mismatch() => {
                        log::debug!("stored symbolic factorization no longer fits; rebuilding");
                        return self.rebuild(builder, a, hash);
                    }
                    Err(e) => {
                        self.invalidate();
                        return Err(e);
                    }
                }
            }
            ReuseAction::RebuiltAll => return self.rebuild(builder, a, hash),
        }
        Ok((self.numeric.as_ref().expect("warm cache"), action))
    }

    fn rebuild<T, B>(&mut self, builder: &B, a: &CsrMatrix<T>, hash: u64) -> Result<(&N, ReuseAction), Error>
    where
        T: Scalar,
        B: Refactorable<T, Symbolic = S, Numeric = N>,
    {
        self.invalidate();
        let mut sym = builder.analyze(a)?;
        let num = builder.factor(&mut sym, a)?;
        self.symbolic = Some(sym);
        self.numeric = Some(num);
        self.last_pattern_hash = Some(hash);
        Ok((self.numeric.as_ref().expect("just built"), ReuseAction::RebuiltAll))
    }
}
