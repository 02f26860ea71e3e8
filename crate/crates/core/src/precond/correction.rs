use super::{PrecondError, Recipe};
use crate::factor::{FactorBundle, FactorKind};
use crate::sparse::CsrMatrix;
use crate::{Error, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionConfig {
    pub delta: f64,
}

impl Default for CorrectionConfig {
    fn default() -> Self {
        Self { delta: 1e-12 }
    }
}

impl CorrectionConfig {
    pub fn validate(&self) -> Result<(), PrecondError> {
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(PrecondError::InvalidDelta(self.delta));
        }
        Ok(())
    }
}

/// `p_ii ← p_ii + δ·sign(p_ii)` with `sign(0) = +1`; missing diagonals are
/// inserted as `+δ`. Off-diagonal entries are untouched.
pub fn diagonal_correction<T: Scalar>(p: &CsrMatrix<T>, delta: f64) -> Result<CsrMatrix<T>, PrecondError> {
    if !p.is_square() {
        return Err(PrecondError::NotSquare {
            nrows: p.nrows(),
            ncols: p.ncols(),
        });
    }
    CorrectionConfig { delta }.validate()?;
    let d = T::of(delta);
    let n = p.nrows();
    let mut trip = Vec::with_capacity(p.nnz() + n);
    for i in 0..n {
        let (cols, vals) = p.row(i);
        let mut seen = false;
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i {
                seen = true;
                trip.push((i, j, if v < T::zero() { v - d } else { v + d }));
            } else {
                trip.push((i, j, v));
            }
        }
        if !seen {
            trip.push((i, i, d));
        }
    }
    let mut out = CsrMatrix::from_unsorted(n, n, trip).expect("entries come from a valid matrix");
    out.set_symmetry_unchecked(p.symmetry());
    Ok(out)
}

/// Matching and scaling, optional filtering, diagonal correction, then
/// complete LU. The bundle carries the row permutation and both scalings, so
/// its solve takes and returns vectors in the original ordering.
pub fn build_corrected_preconditioner<T: Scalar>(
    a: &CsrMatrix<T>,
    tau: Option<f64>,
    delta: f64,
) -> Result<FactorBundle<T>, Error> {
    Recipe {
        kind: FactorKind::LuComplete,
        mc64: true,
        tau,
        delta: Some(delta),
    }
    .build(a)
}
