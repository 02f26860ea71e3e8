use std::collections::BTreeSet;

use super::{FactorBundle, FactorError, FactorKind, PIVOT_TOL};
use crate::sparse::CsrMatrix;
use crate::Scalar;

/// Sparsity of the L and U factors, computed once and reusable for any
/// matrix whose pattern it contains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Symbolic {
    kind: FactorKind,
    n: usize,
    l_offsets: Vec<usize>,
    l_cols: Vec<usize>,
    // diagonal first, then ascending columns > i
    u_offsets: Vec<usize>,
    u_cols: Vec<usize>,
}

impl Symbolic {
    pub fn analyze<T: Scalar>(a: &CsrMatrix<T>, kind: FactorKind) -> Result<Self, FactorError> {
        if !a.is_square() {
            return Err(FactorError::NotSquare {
                nrows: a.nrows(),
                ncols: a.ncols(),
            });
        }
        if kind.is_cholesky() && !a.symmetry().is_symmetric() {
            return Err(FactorError::NotSymmetric(kind.name()));
        }
        let n = a.nrows();
        for i in 0..n {
            if a.row(i).0.is_empty() {
                return Err(FactorError::StructurallySingular { row: i });
            }
        }
        let mut l_offsets = vec![0];
        let mut l_cols = Vec::new();
        let mut u_offsets = vec![0];
        let mut u_cols = Vec::new();
        if kind.is_complete() {
            let mut set = BTreeSet::new();
            for i in 0..n {
                set.clear();
                set.extend(a.row(i).0.iter().copied());
                set.insert(i);
                let mut cursor = 0usize;
                while let Some(&k) = set.range(cursor..i).next() {
                    let (lo, hi) = (u_offsets[k], u_offsets[k + 1]);
                    // skip the diagonal of row k
                    for &j in &u_cols[lo + 1..hi] {
                        set.insert(j);
                    }
                    cursor = k + 1;
                }
                l_cols.extend(set.range(..i).copied());
                u_cols.push(i);
                u_cols.extend(set.range(i + 1..).copied());
                l_offsets.push(l_cols.len());
                u_offsets.push(u_cols.len());
            }
        } else {
            for i in 0..n {
                let cols = a.row(i).0;
                l_cols.extend(cols.iter().copied().filter(|&j| j < i));
                u_cols.push(i);
                u_cols.extend(cols.iter().copied().filter(|&j| j > i));
                l_offsets.push(l_cols.len());
                u_offsets.push(u_cols.len());
            }
        }
        Ok(Self {
            kind,
            n,
            l_offsets,
            l_cols,
            u_offsets,
            u_cols,
        })
    }

    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Entries of L including its diagonal.
    pub fn nnz_l(&self) -> usize {
        self.l_cols.len() + self.n
    }

    pub fn nnz_u(&self) -> usize {
        self.u_cols.len()
    }

    /// True when every stored entry of `a` lies inside the factor pattern.
    pub fn contains_pattern<T: Scalar>(&self, a: &CsrMatrix<T>) -> bool {
        if a.nrows() != self.n || a.ncols() != self.n {
            return false;
        }
        (0..self.n).all(|i| {
            let l = &self.l_cols[self.l_offsets[i]..self.l_offsets[i + 1]];
            let u = &self.u_cols[self.u_offsets[i] + 1..self.u_offsets[i + 1]];
            a.row(i)
                .0
                .iter()
                .all(|&j| j == i || (j < i && l.binary_search(&j).is_ok()) || (j > i && u.binary_search(&j).is_ok()))
        })
    }

    /// Numeric phase: up-looking elimination restricted to the stored pattern.
    pub fn factor<T: Scalar>(&self, a: &CsrMatrix<T>) -> Result<FactorBundle<T>, FactorError> {
        let n = self.n;
        if a.nrows() != n || a.ncols() != n {
            return Err(FactorError::DimensionMismatch {
                expected: n,
                found: a.nrows(),
            });
        }
        if self.kind.is_cholesky() && !a.symmetry().is_symmetric() {
            return Err(FactorError::NotSymmetric(self.kind.name()));
        }
        let tol = T::of(PIVOT_TOL);
        let mut w = vec![T::zero(); n];
        let mut mark = vec![usize::MAX; n];
        let mut l_vals: Vec<T> = Vec::with_capacity(self.l_cols.len());
        let mut u_vals: Vec<T> = Vec::with_capacity(self.u_cols.len());
        for i in 0..n {
            let lrange = self.l_offsets[i]..self.l_offsets[i + 1];
            let urange = self.u_offsets[i]..self.u_offsets[i + 1];
            for &c in self.l_cols[lrange.clone()].iter().chain(&self.u_cols[urange.clone()]) {
                mark[c] = i;
                w[c] = T::zero();
            }
            let (cols, vals) = a.row(i);
            if cols.is_empty() {
                return Err(FactorError::StructurallySingular { row: i });
            }
            let mut maxrow = T::zero();
            for (&j, &v) in cols.iter().zip(vals) {
                if mark[j] != i {
                    return Err(FactorError::PatternMismatch);
                }
                w[j] = v;
                maxrow = maxrow.max(v.abs());
            }
            for &k in &self.l_cols[lrange] {
                let ukk = u_vals[self.u_offsets[k]];
                let lik = w[k] / ukk;
                l_vals.push(lik);
                if lik == T::zero() {
                    continue;
                }
                for idx in self.u_offsets[k] + 1..self.u_offsets[k + 1] {
                    let j = self.u_cols[idx];
                    if mark[j] == i {
                        w[j] -= lik * u_vals[idx];
                    }
                }
            }
            let d = w[i];
            if self.kind.is_cholesky() {
                if !d.is_finite() || d <= tol * maxrow || d <= T::zero() {
                    return Err(FactorError::NonPositivePivot {
                        row: i,
                        value: d.as_f64(),
                    });
                }
            } else if !d.is_finite() || d == T::zero() || d.abs() < tol * maxrow {
                return Err(FactorError::ZeroPivot {
                    row: i,
                    value: d.as_f64(),
                });
            }
            for &c in &self.u_cols[urange] {
                u_vals.push(w[c]);
            }
        }

        if self.kind.is_cholesky() {
            let sqrt_d: Vec<T> = (0..n).map(|i| u_vals[self.u_offsets[i]].sqrt()).collect();
            let mut offsets = vec![0];
            let mut cols = Vec::with_capacity(self.l_cols.len() + n);
            let mut vals = Vec::with_capacity(self.l_cols.len() + n);
            for i in 0..n {
                for idx in self.l_offsets[i]..self.l_offsets[i + 1] {
                    let k = self.l_cols[idx];
                    cols.push(k);
                    vals.push(l_vals[idx] * sqrt_d[k]);
                }
                cols.push(i);
                vals.push(sqrt_d[i]);
                offsets.push(cols.len());
            }
            let l = CsrMatrix::new(n, n, offsets, cols, vals)?;
            let u = l.transpose();
            Ok(FactorBundle {
                kind: self.kind,
                l,
                u,
                row_perm: None,
                col_perm: None,
                row_scale: None,
                col_scale: None,
            })
        } else {
            let l = CsrMatrix::new(n, n, self.l_offsets.clone(), self.l_cols.clone(), l_vals)?;
            let u = CsrMatrix::new(n, n, self.u_offsets.clone(), self.u_cols.clone(), u_vals)?;
            Ok(FactorBundle {
                kind: self.kind,
                l,
                u,
                row_perm: None,
                col_perm: None,
                row_scale: None,
                col_scale: None,
            })
        }
    }
}
