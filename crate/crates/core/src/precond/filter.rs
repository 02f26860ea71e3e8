use super::PrecondError;
use crate::factor::{cholesky_complete, lu_complete, FactorBundle, FactorError};
use crate::sparse::CsrMatrix;
use crate::{Error, Scalar};

/// Drops off-diagonal `a_ij` when `|a_ij| < τ|a_ii|` and `|a_ij| < τ|a_jj|`.
///
/// Diagonal entries are always kept. A structurally missing diagonal counts as
/// zero, so entries in its row and column are never dropped. Because both
/// inequalities are strict, `τ = 0` returns the input unchanged.
pub fn sparse_filter<T: Scalar>(a: &CsrMatrix<T>, tau: f64) -> Result<CsrMatrix<T>, PrecondError> {
    if !a.is_square() {
        return Err(PrecondError::NotSquare {
            nrows: a.nrows(),
            ncols: a.ncols(),
        });
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(PrecondError::InvalidTau(tau));
    }
    let t = T::of(tau);
    let d: Vec<T> = a.diagonal().into_iter().map(|v| t * v.abs()).collect();
    Ok(a.filter_entries(|i, j, v| i == j || !(v.abs() < d[i] && v.abs() < d[j])))
}

/// Threshold per IPM step. With an empty schedule `tau` applies at every
/// step; otherwise entry `(s, τ)` applies from step `s` onward and steps
/// before the first threshold are unfiltered.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub tau: f64,
    pub schedule: Vec<(usize, f64)>,
}

impl FilterConfig {
    pub fn constant(tau: f64) -> Self {
        Self {
            tau,
            schedule: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), PrecondError> {
        for &t in std::iter::once(&self.tau).chain(self.schedule.iter().map(|(_, t)| t)) {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(PrecondError::InvalidTau(t));
            }
        }
        if self.schedule.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(PrecondError::InvalidSchedule(
                "step thresholds must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn tau_at(&self, step: usize) -> f64 {
        if self.schedule.is_empty() {
            return self.tau;
        }
        self.schedule
            .iter()
            .rev()
            .find(|(s, _)| *s <= step)
            .map_or(0.0, |&(_, t)| t)
    }

    /// One notch looser than `current`: the largest scheduled threshold below
    /// it, or no filtering at all.
    pub fn relax(&self, current: f64) -> f64 {
        self.schedule
            .iter()
            .map(|&(_, t)| t)
            .filter(|&t| t < current)
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct FilteredBuild<T> {
    pub bundle: FactorBundle<T>,
    /// Stored entries of the filtered matrix.
    pub filtered_nnz: usize,
    /// Cholesky hit a nonpositive pivot and complete LU was used instead.
    pub lu_fallback: bool,
}

/// Complete Cholesky of the filtered matrix, falling back to complete LU when
/// a pivot is not positive.
pub fn build_filtered_preconditioner<T: Scalar>(a: &CsrMatrix<T>, tau: f64) -> Result<FilteredBuild<T>, Error> {
    if !a.symmetry().is_symmetric() {
        return Err(PrecondError::NotSymmetric("filtered Cholesky preconditioner").into());
    }
    let filtered = sparse_filter(a, tau)?;
    let filtered_nnz = filtered.nnz();
    match cholesky_complete(&filtered) {
        Ok(bundle) => Ok(FilteredBuild {
            bundle,
            filtered_nnz,
            lu_fallback: false,
        }),
        Err(chol) if chol.is_pivot_failure() => match lu_complete(&filtered) {
            Ok(bundle) => {
                log::debug!("filtered Cholesky failed ({chol}); using LU");
                Ok(FilteredBuild {
                    bundle,
                    filtered_nnz,
                    lu_fallback: true,
                })
            }
            Err(lu) => Err(PrecondError::BothFactorizationsFailed { cholesky: chol, lu }.into()),
        },
        Err(e) => Err(Error::Factor(e)),
    }
}

impl FactorError {
    pub(crate) fn is_pattern_mismatch(&self) -> bool {
        match self {
            FactorError::PatternMismatch => true,
            FactorError::Block { source, .. } => source.is_pattern_mismatch(),
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::{solve_right_preconditioned, KrylovConfig, KrylovMethod};
    use crate::sparse::SymmetryTag;
    use crate::synthetic::tridiagonal;
    use crate::testutil::random_sparse;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type M = CsrMatrix<f64>;

    /// Entrywise scan straight from the drop rule on the dense form.
    fn scan(a: &M, tau: f64) -> Vec<(usize, usize, f64)> {
        let n = a.nrows();
        let d = a.to_dense();
        let mut kept = vec![];
        for i in 0..n {
            for j in 0..n {
                if a.get(i, j).is_none() {
                    continue;
                }
                let v = d[i * n + j];
                let drop = i != j && v.abs() < tau * d[i * n + i].abs() && v.abs() < tau * d[j * n + j].abs();
                if !drop {
                    kept.push((i, j, v));
                }
            }
        }
        kept
    }

    #[test]
    fn identity_is_fixed() {
        let a = M::identity(5);
        assert_eq!(sparse_filter(&a, 0.7).unwrap(), a);
    }

    #[test]
    fn both_sided_drop() {
        let a = M::from_dense(2, 2, &[1.0, 1e-5, 1e-5, 1.0]).unwrap();
        let f = sparse_filter(&a, 1e-3).unwrap();
        assert_eq!(f.nnz(), 2);
        assert_eq!(f.to_dense(), vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn one_sided_condition_keeps_entry() {
        let a = M::from_dense(2, 2, &[1e-9, 0.5, 0.5, 1.0]).unwrap();
        assert_eq!(sparse_filter(&a, 1e-3).unwrap(), a);
    }

    #[test]
    fn missing_diagonal_never_drops() {
        let a = M::from_unsorted(2, 2, [(0, 1, 1e-20), (1, 0, 1e-20), (1, 1, 1.0)]).unwrap();
        assert_eq!(sparse_filter(&a, 0.5).unwrap(), a);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(sparse_filter(&M::zeros(2, 3), 0.1).is_err());
        assert!(sparse_filter(&M::identity(2), -1.0).is_err());
        assert!(sparse_filter(&M::identity(2), f64::NAN).is_err());
    }

    #[test]
    fn matches_direct_scan_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for k in 0..100 {
            let n = 3 + k % 20;
            let a = random_sparse(&mut rng, n, n, 0.4);
            let tau = [1e-3, 0.1, 0.5, 2.0][k % 4];
            let f = sparse_filter(&a, tau).unwrap();
            assert_eq!(f.triplets().collect::<Vec<_>>(), scan(&a, tau));
        }
    }

    #[test]
    fn symmetric_input_stays_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = crate::testutil::random_spd(&mut rng, 30, 0.3);
        let f = sparse_filter(&a, 0.05).unwrap();
        assert!(f.symmetry().is_symmetric());
        assert_eq!(f.transpose().to_dense(), f.to_dense());
    }

    proptest! {
        #[test]
        fn tau_monotone_and_zero_identity(seed in 0u64..1000, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_sparse(&mut rng, 12, 12, 0.5);
            prop_assert_eq!(&sparse_filter(&a, 0.0).unwrap(), &a);
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let f_lo = sparse_filter(&a, lo).unwrap();
            let f_hi = sparse_filter(&a, hi).unwrap();
            for (i, j, _) in f_hi.triplets() {
                prop_assert!(f_lo.get(i, j).is_some());
            }
            prop_assert!(f_hi.nnz() <= f_lo.nnz());
        }
    }

    #[test]
    fn schedule_lookup_and_relax() {
        let cfg = FilterConfig {
            tau: 1e-3,
            schedule: vec![(2, 1e-3), (5, 1e-4)],
        };
        cfg.validate().unwrap();
        assert_eq!(cfg.tau_at(0), 0.0);
        assert_eq!(cfg.tau_at(2), 1e-3);
        assert_eq!(cfg.tau_at(4), 1e-3);
        assert_eq!(cfg.tau_at(9), 1e-4);
        assert_eq!(cfg.relax(1e-3), 1e-4);
        assert_eq!(cfg.relax(1e-4), 0.0);
        assert_eq!(FilterConfig::constant(0.1).tau_at(7), 0.1);
        assert_eq!(FilterConfig::constant(0.1).relax(0.1), 0.0);
        let bad = FilterConfig {
            tau: 0.1,
            schedule: vec![(3, 0.1), (3, 0.2)],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_tau_equals_plain_cholesky() {
        let a = crate::synthetic::laplacian_2d::<f64>(4);
        let built = build_filtered_preconditioner(&a, 0.0).unwrap();
        let plain = cholesky_complete(&a).unwrap();
        assert_eq!(built.bundle.l, plain.l);
        assert!(!built.lu_fallback);
        assert_eq!(built.filtered_nnz, a.nnz());
    }

    #[test]
    fn weak_coupling_filters_to_diagonal() {
        let a = tridiagonal::<f64>(10, 2.0, 1e-8);
        let built = build_filtered_preconditioner(&a, 1e-3).unwrap();
        assert!(built.filtered_nnz < a.nnz());
        assert_eq!(built.filtered_nnz, 10);
        assert_eq!(built.bundle.l.nnz(), 10);
        let b = vec![1.0; 10];
        let cfg = KrylovConfig {
            method: KrylovMethod::Cg,
            rel_tol: 1e-8,
            max_iters: 10,
            ..Default::default()
        };
        let (_, rep) = solve_right_preconditioned(&a, &built.bundle, &b, &[0.0; 10], &cfg).unwrap();
        assert!(rep.converged() && rep.iterations <= 10);
    }

    #[test]
    fn indefinite_falls_back_to_lu() {
        let a = M::from_dense(2, 2, &[1.0, 2.0, 2.0, 1.0])
            .unwrap()
            .with_symmetry(SymmetryTag::Symmetric)
            .unwrap();
        let built = build_filtered_preconditioner(&a, 0.0).unwrap();
        assert!(built.lu_fallback);
        let x = built.bundle.sptrsv(&[3.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
        assert!(build_filtered_preconditioner(&M::identity(2).into_general(), 0.0).is_err());
    }
}
