use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::PrecondError;
use crate::sparse::CsrMatrix;
use crate::Scalar;

/// Maximum-product transversal with the scalings derived from its dual
/// potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingResult<T> {
    /// `row_perm[j]` is the original row matched to column `j`, placed at
    /// position `j`.
    pub row_perm: Vec<usize>,
    /// Scale of each row in the permuted ordering.
    pub row_scale: Vec<T>,
    pub col_scale: Vec<T>,
    /// `diag(row_scale) · A[row_perm, :] · diag(col_scale)`.
    pub scaled_matrix: CsrMatrix<T>,
}

#[derive(PartialEq)]
struct Entry {
    dist: f64,
    row: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // min-heap on distance, ties to the lowest row
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.row.cmp(&self.row))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest augmenting paths on costs `c_ij = log(max_k |a_kj|) − log|a_ij|`.
///
/// Explicit zeros are not edges. After every augmentation the reduced costs
/// `c_ij − u_i − v_j` stay nonnegative and vanish on matched edges, so
/// `exp(u_i)` and `exp(v_j) / max_k |a_kj|` scale matched entries to unit
/// magnitude and everything else to at most one.
pub fn mc64_match_scale<T: Scalar>(a: &CsrMatrix<T>) -> Result<ScalingResult<T>, PrecondError> {
    if !a.is_square() {
        return Err(PrecondError::NotSquare {
            nrows: a.nrows(),
            ncols: a.ncols(),
        });
    }
    let n = a.nrows();
    // column-wise edge lists with costs
    let at = a.transpose();
    let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut col_cost: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut colmax = vec![0.0f64; n];
    for j in 0..n {
        let (rows, vals) = at.row(j);
        let cmax = vals.iter().map(|v| v.as_f64().abs()).fold(0.0, f64::max);
        colmax[j] = cmax;
        for (&i, &v) in rows.iter().zip(vals) {
            let av = v.as_f64().abs();
            if av > 0.0 && av.is_finite() {
                col_rows[j].push(i);
                col_cost[j].push(cmax.ln() - av.ln());
            }
        }
    }

    let mut row_match = vec![usize::MAX; n];
    let mut col_match = vec![usize::MAX; n];
    let mut u = vec![0.0f64; n];
    let mut v = vec![0.0f64; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut pred_col = vec![usize::MAX; n];
    let mut done = vec![false; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut finalized: Vec<usize> = Vec::new();
    let mut heap = BinaryHeap::new();

    for j0 in 0..n {
        for &i in &touched {
            dist[i] = f64::INFINITY;
            pred_col[i] = usize::MAX;
            done[i] = false;
        }
        touched.clear();
        finalized.clear();
        heap.clear();

        let relax = |j: usize,
                     base: f64,
                     dist: &mut [f64],
                     pred_col: &mut [usize],
                     done: &[bool],
                     touched: &mut Vec<usize>,
                     heap: &mut BinaryHeap<Entry>| {
            for (&i, &c) in col_rows[j].iter().zip(&col_cost[j]) {
                if done[i] {
                    continue;
                }
                let nd = base + (c - u[i] - v[j]).max(0.0);
                if nd < dist[i] {
                    if dist[i].is_infinite() {
                        touched.push(i);
                    }
                    dist[i] = nd;
                    pred_col[i] = j;
                    heap.push(Entry { dist: nd, row: i });
                }
            }
        };

        relax(j0, 0.0, &mut dist, &mut pred_col, &done, &mut touched, &mut heap);
        let mut end: Option<(usize, f64)> = None;
        while let Some(Entry { dist: d, row: i }) = heap.pop() {
            if done[i] || d > dist[i] {
                continue;
            }
            if row_match[i] == usize::MAX {
                end = Some((i, d));
                break;
            }
            done[i] = true;
            finalized.push(i);
            let j = row_match[i];
            relax(j, d, &mut dist, &mut pred_col, &done, &mut touched, &mut heap);
        }
        let Some((free_row, total)) = end else {
            return Err(PrecondError::StructurallySingular { matched: j0, n });
        };

        v[j0] += total;
        for &i in &finalized {
            let shift = total - dist[i];
            u[i] -= shift;
            v[row_match[i]] += shift;
        }

        let mut i = free_row;
        loop {
            let j = pred_col[i];
            let prev = col_match[j];
            col_match[j] = i;
            row_match[i] = j;
            if j == j0 {
                break;
            }
            i = prev;
        }
    }

    let row_perm = col_match;
    let row_scale: Vec<T> = row_perm.iter().map(|&i| T::of(u[i].exp())).collect();
    let col_scale: Vec<T> = (0..n).map(|j| T::of(v[j].exp() / colmax[j])).collect();
    let identity: Vec<usize> = (0..n).collect();
    let scaled_matrix = a
        .permute(&row_perm, &identity)
        .expect("matching is a permutation")
        .scale(&row_scale, &col_scale)
        .into_general();
    Ok(ScalingResult {
        row_perm,
        row_scale,
        col_scale,
        scaled_matrix,
    })
}
