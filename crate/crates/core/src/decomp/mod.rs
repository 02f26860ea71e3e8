//! Row-block partitions for Block Jacobi and bordered block diagonal (arrow)
//! reorderings for the Schur-complement method.

mod dissection;

pub use dissection::nested_dissection_bbd;

use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use thiserror::Error;

use crate::factor::SchurFactor;
use crate::sparse::{CsrMatrix, SparseError, SymmetryTag};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum DecompError {
    #[error("cannot split {n} rows into {parts} parts")]
    TooManyParts { parts: usize, n: usize },
    #[error("number of parts must be at least 1")]
    NoParts,
    #[error("matrix is not square ({nrows}x{ncols})")]
    NotSquare { nrows: usize, ncols: usize },
    #[error("entry ({row}, {col}) couples blocks {block_a} and {block_b} directly")]
    CrossCoupling {
        row: usize,
        col: usize,
        block_a: usize,
        block_b: usize,
    },
    #[error("invalid block layout: {0}")]
    InvalidLayout(String),
    #[error("expected {expected} Schur contributions, got {found}")]
    ContributionCount { expected: usize, found: usize },
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Near-equal contiguous ranges covering `0..n`; the first `n % parts`
/// ranges are one longer.
pub fn even_ranges(n: usize, parts: usize) -> Vec<Range<usize>> {
    let base = n / parts;
    let extra = n % parts;
    let mut start = 0;
    (0..parts)
        .map(|r| {
            let len = base + usize::from(r < extra);
            let range = start..start + len;
            start += len;
            range
        })
        .collect()
}

/// Contiguous row-wise split of a square matrix across ranks.
#[derive(Debug, Clone)]
pub struct RowPartition<T> {
    n: usize,
    symmetry: SymmetryTag,
    pub row_ranges: Vec<Range<usize>>,
    /// Entries with row and column inside the rank's range.
    pub diag_blocks: Vec<CsrMatrix<T>>,
    /// Remaining entries of the rank's rows, columns renumbered to ghost slots.
    pub offdiag_blocks: Vec<CsrMatrix<T>>,
    /// `ghost_maps[r][k] = (owner, global column)` for ghost slot `k`, in
    /// ascending global order.
    pub ghost_maps: Vec<Vec<(usize, usize)>>,
}

impl<T: Scalar> RowPartition<T> {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nranks(&self) -> usize {
        self.row_ranges.len()
    }

    pub fn owner_of(&self, global: usize) -> usize {
        self.row_ranges.partition_point(|r| r.end <= global)
    }

    /// Rebuilds the global matrix from the per-rank pieces.
    pub fn reassemble(&self) -> CsrMatrix<T> {
        let mut trip = Vec::new();
        for (r, range) in self.row_ranges.iter().enumerate() {
            for (i, j, v) in self.diag_blocks[r].triplets() {
                trip.push((range.start + i, range.start + j, v));
            }
            for (i, k, v) in self.offdiag_blocks[r].triplets() {
                trip.push((range.start + i, self.ghost_maps[r][k].1, v));
            }
        }
        let mut out = CsrMatrix::from_unsorted(self.n, self.n, trip).expect("pieces of a valid matrix");
        out.set_symmetry_unchecked(self.symmetry);
        out
    }
}

pub fn partition_rows<T: Scalar>(a: &CsrMatrix<T>, nranks: usize) -> Result<RowPartition<T>, DecompError> {
    if !a.is_square() {
        return Err(DecompError::NotSquare {
            nrows: a.nrows(),
            ncols: a.ncols(),
        });
    }
    let n = a.nrows();
    if nranks == 0 {
        return Err(DecompError::NoParts);
    }
    if nranks > n {
        return Err(DecompError::TooManyParts { parts: nranks, n });
    }
    let row_ranges = even_ranges(n, nranks);
    let owner = |g: usize| row_ranges.partition_point(|r| r.end <= g);
    let mut diag_blocks = Vec::with_capacity(nranks);
    let mut offdiag_blocks = Vec::with_capacity(nranks);
    let mut ghost_maps = Vec::with_capacity(nranks);
    for range in &row_ranges {
        diag_blocks.push(a.submatrix(range.clone(), range.clone()));
        let mut ghosts: Vec<usize> = Vec::new();
        for i in range.clone() {
            ghosts.extend(a.row(i).0.iter().copied().filter(|j| !range.contains(j)));
        }
        ghosts.sort_unstable();
        ghosts.dedup();
        let mut trip = Vec::new();
        for i in range.clone() {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if !range.contains(&j) {
                    let slot = ghosts.binary_search(&j).expect("collected above");
                    trip.push((i - range.start, slot, v));
                }
            }
        }
        offdiag_blocks.push(CsrMatrix::from_unsorted(range.len(), ghosts.len(), trip)?);
        ghost_maps.push(ghosts.into_iter().map(|g| (owner(g), g)).collect());
    }
    Ok(RowPartition {
        n,
        symmetry: a.symmetry(),
        row_ranges,
        diag_blocks,
        offdiag_blocks,
        ghost_maps,
    })
}

/// One interior block of an arrow-form matrix.
#[derive(Debug, Clone)]
pub struct BbdBlock<T> {
    /// `A_ii`.
    pub diag: CsrMatrix<T>,
    /// `A_si`: interface rows × block columns.
    pub border_row: CsrMatrix<T>,
    /// `A_is`: block rows × interface columns.
    pub border_col: CsrMatrix<T>,
}

/// `A[perm, perm]` split into independent diagonal blocks, their borders and
/// a trailing interface block.
#[derive(Debug, Clone)]
pub struct BbdStructure<T> {
    /// `perm[new] = old`.
    pub perm: Vec<usize>,
    pub block_ranges: Vec<Range<usize>>,
    pub interface_range: Range<usize>,
    pub blocks: Vec<BbdBlock<T>>,
    pub interface_block: CsrMatrix<T>,
    symmetry: SymmetryTag,
}

impl<T: Scalar> BbdStructure<T> {
    /// Splits `A[perm, perm]` along `block_ranges`; everything after the last
    /// range is the interface. Fails if two distinct blocks are coupled.
    pub fn from_parts(
        a: &CsrMatrix<T>,
        perm: Vec<usize>,
        block_ranges: Vec<Range<usize>>,
    ) -> Result<Self, DecompError> {
        if !a.is_square() {
            return Err(DecompError::NotSquare {
                nrows: a.nrows(),
                ncols: a.ncols(),
            });
        }
        let n = a.nrows();
        if block_ranges.is_empty() {
            return Err(DecompError::NoParts);
        }
        let mut expect = 0;
        for r in &block_ranges {
            if r.start != expect || r.end < r.start {
                return Err(DecompError::InvalidLayout(
                    "block ranges must be contiguous from 0".into(),
                ));
            }
            expect = r.end;
        }
        if expect > n {
            return Err(DecompError::InvalidLayout("block ranges exceed the matrix".into()));
        }
        let interface_range = expect..n;
        let p = a.symmetric_permute(&perm)?;
        let block_of = |i: usize| {
            if i >= interface_range.start {
                None
            } else {
                Some(block_ranges.partition_point(|r| r.end <= i))
            }
        };
        for (i, j, _) in p.triplets() {
            if let (Some(bi), Some(bj)) = (block_of(i), block_of(j)) {
                if bi != bj {
                    return Err(DecompError::CrossCoupling {
                        row: perm[i],
                        col: perm[j],
                        block_a: bi,
                        block_b: bj,
                    });
                }
            }
        }
        let iface = interface_range.clone();
        let blocks = block_ranges
            .iter()
            .map(|r| BbdBlock {
                diag: p.submatrix(r.clone(), r.clone()),
                border_row: p.submatrix(iface.clone(), r.clone()),
                border_col: p.submatrix(r.clone(), iface.clone()),
            })
            .collect();
        Ok(Self {
            perm,
            block_ranges,
            interface_block: p.submatrix(iface.clone(), iface.clone()),
            interface_range,
            blocks,
            symmetry: a.symmetry(),
        })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn nblocks(&self) -> usize {
        self.block_ranges.len()
    }

    pub fn interface_dim(&self) -> usize {
        self.interface_range.len()
    }

    /// `A[perm, perm]` rebuilt from the stored pieces.
    pub fn reassemble(&self) -> CsrMatrix<T> {
        let s = self.interface_range.start;
        let mut trip = Vec::new();
        for (b, r) in self.block_ranges.iter().enumerate() {
            let blk = &self.blocks[b];
            trip.extend(blk.diag.triplets().map(|(i, j, v)| (r.start + i, r.start + j, v)));
            trip.extend(blk.border_row.triplets().map(|(i, j, v)| (s + i, r.start + j, v)));
            trip.extend(blk.border_col.triplets().map(|(i, j, v)| (r.start + i, s + j, v)));
        }
        trip.extend(self.interface_block.triplets().map(|(i, j, v)| (s + i, s + j, v)));
        let n = self.dim();
        let mut out = CsrMatrix::from_unsorted(n, n, trip).expect("pieces of a valid matrix");
        out.set_symmetry_unchecked(self.symmetry);
        out
    }

    /// Text sidecar: block layout and permutation, one item per line.
    pub fn format_sidecar(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "n {}", self.dim());
        let _ = writeln!(out, "nblocks {}", self.nblocks());
        for (b, r) in self.block_ranges.iter().enumerate() {
            let _ = writeln!(out, "block {b} {} {}", r.start, r.end);
        }
        let _ = writeln!(
            out,
            "interface {} {}",
            self.interface_range.start, self.interface_range.end
        );
        out.push_str("perm");
        for p in &self.perm {
            let _ = write!(out, " {p}");
        }
        out.push('\n');
        out
    }

    pub fn write_sidecar<P: AsRef<Path>>(&self, path: P) -> Result<(), DecompError> {
        std::fs::write(path, self.format_sidecar())?;
        Ok(())
    }
}

/// `interface_block − Σ_b contrib_b`, summed in ascending block order.
pub fn assemble_schur<T: Scalar>(
    s: &BbdStructure<T>,
    contribs: &[SchurFactor<T>],
) -> Result<CsrMatrix<T>, DecompError> {
    if contribs.len() != s.nblocks() {
        return Err(DecompError::ContributionCount {
            expected: s.nblocks(),
            found: contribs.len(),
        });
    }
    let mats: Vec<&CsrMatrix<T>> = contribs.iter().map(|c| &c.schur_contrib).collect();
    subtract_contributions(&s.interface_block, &mats, s.symmetry)
}

pub(crate) fn subtract_contributions<T: Scalar>(
    interface: &CsrMatrix<T>,
    contribs: &[&CsrMatrix<T>],
    symmetry: SymmetryTag,
) -> Result<CsrMatrix<T>, DecompError> {
    let mut total = interface.clone();
    for c in contribs {
        total = total.add_scaled(-T::one(), c)?;
    }
    if symmetry.is_symmetric() {
        // exact arithmetic keeps the Schur complement symmetric; accept the
        // tag when rounding stays within the symmetry tolerance
        Ok(total.clone().with_symmetry(SymmetryTag::Symmetric).unwrap_or(total))
    } else {
        Ok(total.into_general())
    }
}
