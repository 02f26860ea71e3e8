use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::ops::Range;

use super::SparseError;
use crate::Scalar;

/// Symmetry claim carried by a matrix. Selects IC vs ILU and gates CG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SymmetryTag {
    #[default]
    General,
    Symmetric,
    SpdClaimed,
}

impl SymmetryTag {
    pub fn is_symmetric(self) -> bool {
        !matches!(self, SymmetryTag::General)
    }
}

/// Compressed sparse row matrix.
///
/// Invariants (enforced by every constructor except the canonicalizing
/// [`CsrMatrix::from_unsorted`]): `row_offsets` is nondecreasing from 0 to
/// `nnz`, column indices are strictly increasing within each row and all
/// indices are in range.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<T>,
    symmetry: SymmetryTag,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Strict constructor: rejects any violated CSR invariant.
    pub fn new(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self, SparseError> {
        if row_offsets.len() != nrows + 1 {
            return Err(SparseError::InvalidStructure(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                nrows + 1
            )));
        }
        if row_offsets[0] != 0 {
            return Err(SparseError::InvalidStructure("row_offsets[0] != 0".into()));
        }
        if col_indices.len() != values.len() {
            return Err(SparseError::InvalidStructure(
                "col_indices and values differ in length".into(),
            ));
        }
        if row_offsets[nrows] != col_indices.len() {
            return Err(SparseError::InvalidStructure(format!(
                "row_offsets[nrows] = {} but nnz = {}",
                row_offsets[nrows],
                col_indices.len()
            )));
        }
        for i in 0..nrows {
            let (lo, hi) = (row_offsets[i], row_offsets[i + 1]);
            if lo > hi {
                return Err(SparseError::InvalidStructure(format!(
                    "row_offsets decreases at row {i}"
                )));
            }
            let cols = &col_indices[lo..hi];
            for (k, &c) in cols.iter().enumerate() {
                if c >= ncols {
                    return Err(SparseError::IndexOutOfRange {
                        row: i,
                        col: c,
                        nrows,
                        ncols,
                    });
                }
                if k > 0 && cols[k - 1] >= c {
                    return Err(SparseError::InvalidStructure(format!(
                        "row {i}: column indices not strictly increasing (duplicate or unsorted)"
                    )));
                }
            }
        }
        Ok(Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
            symmetry: SymmetryTag::General,
        })
    }

    /// Builds from triplets in any order, summing duplicates.
    pub fn from_unsorted<I>(nrows: usize, ncols: usize, triplets: I) -> Result<Self, SparseError>
    where
        I: IntoIterator<Item = (usize, usize, T)>,
    {
        let mut entries: Vec<(usize, usize, T)> = triplets.into_iter().collect();
        for &(r, c, _) in &entries {
            if r >= nrows || c >= ncols {
                return Err(SparseError::IndexOutOfRange {
                    row: r,
                    col: c,
                    nrows,
                    ncols,
                });
            }
        }
        entries.sort_by_key(|e| (e.0, e.1));
        let mut counts = vec![0usize; nrows];
        let mut col_indices = Vec::with_capacity(entries.len());
        let mut values: Vec<T> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
            } else {
                counts[r] += 1;
                col_indices.push(c);
                values.push(v);
                last = Some((r, c));
            }
        }
        let row_offsets = offsets_from_counts(&counts)?;
        Ok(Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
            symmetry: SymmetryTag::General,
        })
    }

    /// Row-major dense input; exact zeros are not stored.
    pub fn from_dense(nrows: usize, ncols: usize, data: &[T]) -> Result<Self, SparseError> {
        if data.len() != nrows * ncols {
            return Err(SparseError::DimensionMismatch {
                what: "dense data",
                expected: nrows * ncols,
                found: data.len(),
            });
        }
        let trip = (0..nrows).flat_map(|i| {
            (0..ncols).filter_map(move |j| {
                let v = data[i * ncols + j];
                (v != T::zero()).then_some((i, j, v))
            })
        });
        Self::from_unsorted(nrows, ncols, trip)
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_offsets: vec![0; nrows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
            symmetry: SymmetryTag::General,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![T::one(); n])
    }

    /// Diagonal matrix; every diagonal position is stored, zeros included.
    pub fn from_diagonal(d: &[T]) -> Self {
        let n = d.len();
        Self {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: d.to_vec(),
            symmetry: SymmetryTag::Symmetric,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Mutable values; the sparsity pattern stays fixed.
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn symmetry(&self) -> SymmetryTag {
        self.symmetry
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[r.clone()], &self.values[r])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> Option<T> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).ok().map(|k| vals[k])
    }

    /// Diagonal values, zero where structurally absent.
    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i).unwrap_or_else(T::zero))
            .collect()
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> T {
        self.values.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// Tags the matrix after checking the claim. Symmetric tags require a
    /// square matrix whose entries agree with their mirror within
    /// `1e-12 · max|a_ij|` (absent entries count as zero).
    pub fn with_symmetry(mut self, tag: SymmetryTag) -> Result<Self, SparseError> {
        if tag.is_symmetric() {
            if !self.is_square() {
                return Err(SparseError::NotSquare {
                    nrows: self.nrows,
                    ncols: self.ncols,
                });
            }
            let tol = T::of(1e-12) * self.max_abs();
            for (i, j, v) in self.triplets() {
                let mirror = self.get(j, i).unwrap_or_else(T::zero);
                if (v - mirror).abs() > tol {
                    return Err(SparseError::NotSymmetric { row: i, col: j });
                }
            }
        }
        self.symmetry = tag;
        Ok(self)
    }

    /// Drops the symmetry claim.
    pub fn into_general(mut self) -> Self {
        self.symmetry = SymmetryTag::General;
        self
    }

    pub(crate) fn set_symmetry_unchecked(&mut self, tag: SymmetryTag) {
        self.symmetry = tag;
    }

    /// Hash of `(nrows, ncols, row_offsets, col_indices)`; values excluded.
    pub fn pattern_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.nrows.hash(&mut h);
        self.ncols.hash(&mut h);
        self.row_offsets.hash(&mut h);
        self.col_indices.hash(&mut h);
        h.finish()
    }

    pub fn same_pattern(&self, other: &Self) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.row_offsets == other.row_offsets
            && self.col_indices == other.col_indices
    }

    /// `y = A x` with ascending-column accumulation per row.
    pub fn spmv(&self, x: &[T]) -> Result<Vec<T>, SparseError> {
        if x.len() != self.ncols {
            return Err(SparseError::DimensionMismatch {
                what: "spmv input",
                expected: self.ncols,
                found: x.len(),
            });
        }
        let mut y = vec![T::zero(); self.nrows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// Unchecked variant of [`CsrMatrix::spmv`] writing into `y`.
    pub fn spmv_into(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = T::zero();
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            *yi = acc;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols];
        for &c in &self.col_indices {
            counts[c] += 1;
        }
        let row_offsets = offsets_from_counts(&counts).expect("transpose offsets fit");
        let mut next = row_offsets.clone();
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        for i in 0..self.nrows {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                let c = self.col_indices[k];
                let dst = next[c];
                col_indices[dst] = i;
                values[dst] = self.values[k];
                next[c] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            row_offsets,
            col_indices,
            values,
            symmetry: self.symmetry,
        }
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<T> {
        let mut d = vec![T::zero(); self.nrows * self.ncols];
        for (i, j, v) in self.triplets() {
            d[i * self.ncols + j] = v;
        }
        d
    }

    /// `B[i][j] = A[row_perm[i]][col_perm[j]]`.
    pub fn permute(&self, row_perm: &[usize], col_perm: &[usize]) -> Result<Self, SparseError> {
        check_perm(row_perm, self.nrows)?;
        check_perm(col_perm, self.ncols)?;
        let mut col_inv = vec![0usize; self.ncols];
        for (new, &old) in col_perm.iter().enumerate() {
            col_inv[old] = new;
        }
        let mut counts = Vec::with_capacity(self.nrows);
        let mut col_indices = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        let mut buf: Vec<(usize, T)> = Vec::new();
        for &old_row in row_perm {
            let (cols, vals) = self.row(old_row);
            buf.clear();
            buf.extend(cols.iter().zip(vals).map(|(&c, &v)| (col_inv[c], v)));
            buf.sort_by_key(|e| e.0);
            counts.push(buf.len());
            for &(c, v) in &buf {
                col_indices.push(c);
                values.push(v);
            }
        }
        let symmetric_perm = row_perm == col_perm;
        Ok(Self {
            nrows: self.nrows,
            ncols: self.ncols,
            row_offsets: offsets_from_counts(&counts)?,
            col_indices,
            values,
            symmetry: if symmetric_perm {
                self.symmetry
            } else {
                SymmetryTag::General
            },
        })
    }

    /// `P A Pᵀ` with `(P A Pᵀ)[i][j] = A[perm[i]][perm[j]]`.
    pub fn symmetric_permute(&self, perm: &[usize]) -> Result<Self, SparseError> {
        self.permute(perm, perm)
    }

    /// Contiguous block `A[rows, cols]`.
    pub fn submatrix(&self, rows: Range<usize>, cols: Range<usize>) -> Self {
        let mut counts = Vec::with_capacity(rows.len());
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for i in rows.clone() {
            let (c, v) = self.row(i);
            let lo = c.partition_point(|&x| x < cols.start);
            let hi = c.partition_point(|&x| x < cols.end);
            counts.push(hi - lo);
            col_indices.extend(c[lo..hi].iter().map(|&x| x - cols.start));
            values.extend_from_slice(&v[lo..hi]);
        }
        let symmetry = if rows == cols {
            self.symmetry
        } else {
            SymmetryTag::General
        };
        Self {
            nrows: rows.len(),
            ncols: cols.len(),
            row_offsets: offsets_from_counts(&counts).expect("submatrix offsets fit"),
            col_indices,
            values,
            symmetry,
        }
    }

    /// `diag(row_scale) · A · diag(col_scale)`.
    pub fn scale(&self, row_scale: &[T], col_scale: &[T]) -> Self {
        let mut out = self.clone();
        for i in 0..self.nrows {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                out.values[k] = row_scale[i] * self.values[k] * col_scale[self.col_indices[k]];
            }
        }
        if row_scale != col_scale {
            out.symmetry = SymmetryTag::General;
        }
        out
    }

    /// `self + alpha · other` over the union pattern.
    pub fn add_scaled(&self, alpha: T, other: &Self) -> Result<Self, SparseError> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(SparseError::DimensionMismatch {
                what: "matrix sum",
                expected: self.nrows * self.ncols,
                found: other.nrows * other.ncols,
            });
        }
        let mut counts = Vec::with_capacity(self.nrows);
        let mut col_indices = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            let (cb, vb) = other.row(i);
            let (mut p, mut q) = (0, 0);
            let before = col_indices.len();
            while p < ca.len() || q < cb.len() {
                if q == cb.len() || (p < ca.len() && ca[p] < cb[q]) {
                    col_indices.push(ca[p]);
                    values.push(va[p]);
                    p += 1;
                } else if p == ca.len() || cb[q] < ca[p] {
                    col_indices.push(cb[q]);
                    values.push(alpha * vb[q]);
                    q += 1;
                } else {
                    col_indices.push(ca[p]);
                    values.push(va[p] + alpha * vb[q]);
                    p += 1;
                    q += 1;
                }
            }
            counts.push(col_indices.len() - before);
        }
        let symmetry = if self.symmetry.is_symmetric() && other.symmetry.is_symmetric() {
            SymmetryTag::Symmetric
        } else {
            SymmetryTag::General
        };
        Ok(Self {
            nrows: self.nrows,
            ncols: self.ncols,
            row_offsets: offsets_from_counts(&counts)?,
            col_indices,
            values,
            symmetry,
        })
    }

    /// Lower triangle including the diagonal.
    pub fn lower_triangle(&self) -> Self {
        let trip = self.triplets().filter(|&(i, j, _)| j <= i);
        Self::from_unsorted(self.nrows, self.ncols, trip).expect("subset of a valid matrix")
    }

    /// Copy keeping only entries for which `keep(i, j, v)` holds.
    pub fn filter_entries<F>(&self, mut keep: F) -> Self
    where
        F: FnMut(usize, usize, T) -> bool,
    {
        let mut counts = Vec::with_capacity(self.nrows);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            let before = col_indices.len();
            for (&j, &x) in c.iter().zip(v) {
                if keep(i, j, x) {
                    col_indices.push(j);
                    values.push(x);
                }
            }
            counts.push(col_indices.len() - before);
        }
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            row_offsets: offsets_from_counts(&counts).expect("subset offsets fit"),
            col_indices,
            values,
            symmetry: self.symmetry,
        }
    }

    /// Converts every value to another scalar type.
    pub fn cast<U: Scalar>(&self) -> CsrMatrix<U> {
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_offsets: self.row_offsets.clone(),
            col_indices: self.col_indices.clone(),
            values: self
                .values
                .iter()
                .map(|v| U::from_f64(v.as_f64()).unwrap_or_else(U::nan))
                .collect(),
            symmetry: self.symmetry,
        }
    }
}

/// `S = B · diag(dinv) · Bᵀ`, tagged symmetric and exactly mirrored.
pub fn spgemm_normal<T: Scalar>(b: &CsrMatrix<T>, dinv: &[T]) -> Result<CsrMatrix<T>, SparseError> {
    if dinv.len() != b.ncols() {
        return Err(SparseError::DimensionMismatch {
            what: "normal-equation weights",
            expected: b.ncols(),
            found: dinv.len(),
        });
    }
    for (index, &d) in dinv.iter().enumerate() {
        if !(d.is_finite() && d > T::zero()) {
            return Err(SparseError::InvalidWeight {
                index,
                value: d.as_f64(),
            });
        }
    }
    let m = b.nrows();
    let bt = b.transpose();
    let mut work = vec![T::zero(); m];
    let mut mark = vec![usize::MAX; m];
    let mut touched: Vec<usize> = Vec::new();
    let mut lower: Vec<(usize, usize, T)> = Vec::new();
    for i in 0..m {
        touched.clear();
        let (cols, vals) = b.row(i);
        for (&k, &bik) in cols.iter().zip(vals) {
            let w = bik * dinv[k];
            let (rows_k, vals_k) = bt.row(k);
            for (&j, &bjk) in rows_k.iter().zip(vals_k) {
                if j > i {
                    break;
                }
                if mark[j] != i {
                    mark[j] = i;
                    work[j] = T::zero();
                    touched.push(j);
                }
                work[j] += w * bjk;
            }
        }
        for &j in &touched {
            lower.push((i, j, work[j]));
        }
    }
    let mirrored = lower
        .iter()
        .filter(|e| e.0 != e.1)
        .map(|&(i, j, v)| (j, i, v))
        .collect::<Vec<_>>();
    lower.extend(mirrored);
    let mut s = CsrMatrix::from_unsorted(m, m, lower)?;
    s.set_symmetry_unchecked(SymmetryTag::Symmetric);
    Ok(s)
}

pub(crate) fn offsets_from_counts(counts: &[usize]) -> Result<Vec<usize>, SparseError> {
    let mut offsets = Vec::with_capacity(counts.len() + 1);
    let mut acc = 0usize;
    offsets.push(0);
    for &c in counts {
        acc = acc.checked_add(c).ok_or(SparseError::OffsetOverflow)?;
        offsets.push(acc);
    }
    Ok(offsets)
}

pub(crate) fn check_perm(perm: &[usize], n: usize) -> Result<(), SparseError> {
    if perm.len() != n {
        return Err(SparseError::DimensionMismatch {
            what: "permutation",
            expected: n,
            found: perm.len(),
        });
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(SparseError::InvalidStructure(format!("not a permutation of 0..{n}")));
        }
        seen[p] = true;
    }
    Ok(())
}
