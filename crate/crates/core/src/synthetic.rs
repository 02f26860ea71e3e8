//! Seeded generators for test and benchmark instances.

use rand::Rng;

use crate::ipm::LpProblem;
use crate::sparse::{CsrMatrix, SymmetryTag};
use crate::Scalar;

fn nonzero_uniform<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let v: f64 = rng.random_range(-1.0..1.0);
        if v.abs() > 1e-3 {
            return v;
        }
    }
}

/// Random pattern with the given density; values uniform in ±[1e-3, 1).
pub fn random_sparse<T: Scalar, R: Rng>(rng: &mut R, nrows: usize, ncols: usize, density: f64) -> CsrMatrix<T> {
    let mut trip = Vec::new();
    for i in 0..nrows {
        for j in 0..ncols {
            if rng.random_bool(density) {
                trip.push((i, j, T::of(nonzero_uniform(rng))));
            }
        }
    }
    CsrMatrix::from_unsorted(nrows, ncols, trip).expect("in-range triplets")
}

/// Symmetric, strictly diagonally dominant with positive diagonal (hence SPD).
pub fn random_spd<T: Scalar, R: Rng>(rng: &mut R, n: usize, density: f64) -> CsrMatrix<T> {
    let mut trip = Vec::new();
    let mut rowsum = vec![0.0f64; n];
    for i in 0..n {
        for j in 0..i {
            if rng.random_bool(density) {
                let v = nonzero_uniform(rng);
                trip.push((i, j, v));
                trip.push((j, i, v));
                rowsum[i] += v.abs();
                rowsum[j] += v.abs();
            }
        }
    }
    for (i, s) in rowsum.iter().enumerate() {
        trip.push((i, i, 1.0 + s * rng.random_range(1.2..2.0)));
    }
    to_matrix(n, n, trip)
        .with_symmetry(SymmetryTag::SpdClaimed)
        .expect("mirrored construction")
}

/// Nonsymmetric, strictly row and column diagonally dominant.
pub fn random_nonsym_dd<T: Scalar, R: Rng>(rng: &mut R, n: usize, density: f64) -> CsrMatrix<T> {
    let mut trip = Vec::new();
    let mut rowsum = vec![0.0f64; n];
    let mut colsum = vec![0.0f64; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(density) {
                let v = nonzero_uniform(rng);
                trip.push((i, j, v));
                rowsum[i] += v.abs();
                colsum[j] += v.abs();
            }
        }
    }
    for i in 0..n {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let mag = 1.0 + rowsum[i].max(colsum[i]) * rng.random_range(1.2..2.0);
        trip.push((i, i, sign * mag));
    }
    to_matrix(n, n, trip)
}

/// Bordered block diagonal matrix in natural order: `nblocks` interior blocks
/// of `block` rows followed by an `iface`-row interface. Diagonally dominant;
/// symmetric when `symmetric` is set.
pub fn random_arrow<T: Scalar, R: Rng>(
    rng: &mut R,
    nblocks: usize,
    block: usize,
    iface: usize,
    density: f64,
    symmetric: bool,
) -> CsrMatrix<T> {
    let n = nblocks * block + iface;
    let start_iface = nblocks * block;
    let mut trip = Vec::new();
    let mut rowsum = vec![0.0f64; n];
    let mut colsum = vec![0.0f64; n];
    let mut push = |trip: &mut Vec<(usize, usize, f64)>, i: usize, j: usize, v: f64| {
        trip.push((i, j, v));
        rowsum[i] += v.abs();
        colsum[j] += v.abs();
    };
    let blocks: Vec<std::ops::Range<usize>> = (0..nblocks).map(|b| b * block..(b + 1) * block).collect();
    let coupled = |i: usize, j: usize| {
        if i >= start_iface || j >= start_iface {
            return true;
        }
        blocks.iter().any(|r| r.contains(&i) && r.contains(&j))
    };
    for i in 0..n {
        for j in 0..n {
            if i == j || !coupled(i, j) {
                continue;
            }
            if symmetric && j > i {
                continue;
            }
            // guarantee at least one border link per block row
            let forced = i < start_iface && j == start_iface + (i % iface.max(1)) && iface > 0;
            if forced || rng.random_bool(density) {
                let v = nonzero_uniform(rng);
                push(&mut trip, i, j, v);
                if symmetric {
                    push(&mut trip, j, i, v);
                } else if forced {
                    push(&mut trip, j, i, nonzero_uniform(rng));
                }
            }
        }
    }
    for i in 0..n {
        let mag = 1.0 + rowsum[i].max(colsum[i]) * rng.random_range(1.2..2.0);
        trip.push((i, i, mag));
    }
    let a = to_matrix(n, n, trip);
    if symmetric {
        a.with_symmetry(SymmetryTag::SpdClaimed).expect("mirrored")
    } else {
        a
    }
}

/// Five-point Laplacian on a `k × k` grid.
pub fn laplacian_2d<T: Scalar>(k: usize) -> CsrMatrix<T> {
    let n = k * k;
    let mut trip = Vec::new();
    for r in 0..k {
        for c in 0..k {
            let i = r * k + c;
            trip.push((i, i, 4.0));
            if r > 0 {
                trip.push((i, i - k, -1.0));
            }
            if r + 1 < k {
                trip.push((i, i + k, -1.0));
            }
            if c > 0 {
                trip.push((i, i - 1, -1.0));
            }
            if c + 1 < k {
                trip.push((i, i + 1, -1.0));
            }
        }
    }
    to_matrix(n, n, trip)
        .with_symmetry(SymmetryTag::SpdClaimed)
        .expect("symmetric stencil")
}

/// Symmetric tridiagonal matrix with constant bands.
pub fn tridiagonal<T: Scalar>(n: usize, diag: f64, off: f64) -> CsrMatrix<T> {
    let mut trip = Vec::new();
    for i in 0..n {
        trip.push((i, i, diag));
        if i + 1 < n {
            trip.push((i, i + 1, off));
            trip.push((i + 1, i, off));
        }
    }
    to_matrix(n, n, trip)
        .with_symmetry(SymmetryTag::Symmetric)
        .expect("symmetric bands")
}

/// LP with a known optimum: `b = B x̂`, `c = Bᵀŷ + ẑ` with `x̂` positive on
/// the first `m` columns and `ẑ` positive on the rest.
pub struct ConstructedLp<T> {
    pub problem: LpProblem<T>,
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub z: Vec<T>,
    pub objective: f64,
}

pub fn constructed_lp<T: Scalar, R: Rng>(rng: &mut R, m: usize, n: usize, density: f64) -> ConstructedLp<T> {
    assert!(m <= n, "need m <= n");
    let mut trip = Vec::new();
    for i in 0..m {
        let mut off = 0.0;
        for j in 0..n {
            if j != i && rng.random_bool(density) {
                let v = nonzero_uniform(rng);
                trip.push((i, j, v));
                if j < m {
                    off += v.abs();
                }
            }
        }
        // dominant basis block keeps B[:, 0..m] well conditioned
        trip.push((i, i, 1.0 + 1.5 * off));
    }
    let bm: CsrMatrix<f64> = to_matrix(m, n, trip);
    let x: Vec<f64> = (0..n)
        .map(|j| if j < m { rng.random_range(0.5..2.0) } else { 0.0 })
        .collect();
    let z: Vec<f64> = (0..n)
        .map(|j| if j < m { 0.0 } else { rng.random_range(0.5..2.0) })
        .collect();
    let y: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b = bm.spmv(&x).expect("x has n entries");
    let bty = bm.transpose().spmv(&y).expect("y has m entries");
    let c: Vec<f64> = bty.iter().zip(&z).map(|(a, b)| a + b).collect();
    let objective = c.iter().zip(&x).map(|(a, b)| a * b).sum();
    let cast = |v: &[f64]| v.iter().map(|&t| T::of(t)).collect::<Vec<T>>();
    ConstructedLp {
        problem: LpProblem::new(bm.cast(), cast(&b), cast(&c)).expect("diagonal gives full rank"),
        x: cast(&x),
        y: cast(&y),
        z: cast(&z),
        objective,
    }
}

/// LP whose normal matrix at the starting point has unit diagonal and
/// `1e-8` couplings between neighboring rows.
pub fn scale_disparate_lp<T: Scalar>(m: usize) -> LpProblem<T> {
    let n = 2 * m;
    let mut trip = Vec::new();
    for i in 0..m {
        trip.push((i, i, 1.0));
        trip.push((i, m + i, 1e-4));
        if m > 1 {
            trip.push((i, m + (i + 1) % m, 1e-4));
        }
    }
    let bm: CsrMatrix<T> = to_matrix(m, n, trip);
    let b = bm.spmv(&vec![T::one(); n]).expect("n entries");
    let c = (0..n).map(|j| T::of(if j < m { 1.0 } else { 2.0 })).collect();
    LpProblem::new(bm, b, c).expect("identity block gives full rank")
}

fn to_matrix<T: Scalar>(nrows: usize, ncols: usize, trip: Vec<(usize, usize, f64)>) -> CsrMatrix<T> {
    CsrMatrix::from_unsorted(nrows, ncols, trip.into_iter().map(|(i, j, v)| (i, j, T::of(v))))
        .expect("in-range triplets")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generators_have_claimed_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s: CsrMatrix<f64> = random_spd(&mut rng, 20, 0.2);
        assert!(s.symmetry().is_symmetric());
        let a: CsrMatrix<f64> = random_nonsym_dd(&mut rng, 20, 0.2);
        for i in 0..20 {
            let (cols, vals) = a.row(i);
            let off: f64 = cols
                .iter()
                .zip(vals)
                .filter(|(&j, _)| j != i)
                .map(|(_, v)| v.abs())
                .sum();
            assert!(a.get(i, i).unwrap().abs() > off);
        }
        let w: CsrMatrix<f64> = random_arrow(&mut rng, 3, 4, 2, 0.5, false);
        for (i, j, _) in w.triplets() {
            if i < 12 && j < 12 {
                assert_eq!(i / 4, j / 4);
            }
        }
        assert_eq!(laplacian_2d::<f64>(3).nnz(), 9 + 2 * 12);
    }
}
