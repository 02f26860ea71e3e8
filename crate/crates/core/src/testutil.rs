//! Dense brute-force oracles for unit tests.

use rand::Rng;

use crate::sparse::CsrMatrix;

pub fn random_sparse<R: Rng>(rng: &mut R, nrows: usize, ncols: usize, density: f64) -> CsrMatrix<f64> {
    crate::synthetic::random_sparse(rng, nrows, ncols, density)
}

pub fn random_spd<R: Rng>(rng: &mut R, n: usize, density: f64) -> CsrMatrix<f64> {
    crate::synthetic::random_spd(rng, n, density)
}

pub fn random_nonsym_dd<R: Rng>(rng: &mut R, n: usize, density: f64) -> CsrMatrix<f64> {
    crate::synthetic::random_nonsym_dd(rng, n, density)
}

pub fn dense_matvec(a: &[f64], nrows: usize, ncols: usize, x: &[f64]) -> Vec<f64> {
    (0..nrows)
        .map(|i| (0..ncols).map(|j| a[i * ncols + j] * x[j]).sum())
        .collect()
}

/// Gaussian elimination with partial pivoting on a row-major copy.
pub fn dense_solve(a: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[i * n + k].abs().total_cmp(&m[j * n + k].abs()))
            .unwrap();
        if p != k {
            for j in 0..n {
                m.swap(k * n + j, p * n + j);
            }
            x.swap(k, p);
        }
        let piv = m[k * n + k];
        assert!(piv != 0.0, "singular oracle input");
        for i in k + 1..n {
            let f = m[i * n + k] / piv;
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                m[i * n + j] -= f * m[k * n + j];
            }
            x[i] -= f * x[k];
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for j in k + 1..n {
            s -= m[k * n + j] * x[j];
        }
        x[k] = s / m[k * n + k];
    }
    x
}

pub fn dense_matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

#[test]
fn dense_solve_small() {
    let x = dense_solve(&[4.0, 1.0, 1.0, 3.0], 2, &[1.0, 2.0]);
    assert!((x[0] - 1.0 / 11.0).abs() < 1e-15);
    assert!((x[1] - 7.0 / 11.0).abs() < 1e-15);
}
