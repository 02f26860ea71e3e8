use super::{factorize, FactorBundle, FactorError, FactorKind};
use crate::sparse::CsrMatrix;
use crate::Scalar;

/// One interior block of a bordered system together with its Schur
/// complement contribution `A_si · A_ii⁻¹ · A_is`.
#[derive(Debug, Clone)]
pub struct SchurFactor<T> {
    pub interior: FactorBundle<T>,
    /// `A_si`: interface rows × block columns.
    pub border_row: CsrMatrix<T>,
    /// `A_is`: block rows × interface columns.
    pub border_col: CsrMatrix<T>,
    /// Interface × interface, dense-as-sparse (exact zeros omitted).
    pub schur_contrib: CsrMatrix<T>,
}

impl<T: Scalar> SchurFactor<T> {
    pub fn interface_dim(&self) -> usize {
        self.schur_contrib.nrows()
    }

    /// Row-major dense copy of the contribution, the payload sent to the
    /// interface owner.
    pub fn contrib_dense(&self) -> Vec<T> {
        self.schur_contrib.to_dense()
    }
}

/// Factors the interior block and forms its Schur contribution one interface
/// column at a time, in ascending column order.
pub fn schur_partial_factor<T: Scalar>(
    diag: &CsrMatrix<T>,
    border_row: &CsrMatrix<T>,
    border_col: &CsrMatrix<T>,
    kind: FactorKind,
) -> Result<SchurFactor<T>, FactorError> {
    let nb = diag.nrows();
    let ns = border_row.nrows();
    if border_row.ncols() != nb || border_col.nrows() != nb || border_col.ncols() != ns {
        return Err(FactorError::DimensionMismatch {
            expected: nb,
            found: border_col.nrows(),
        });
    }
    let interior = if nb == 0 {
        FactorBundle {
            kind,
            l: CsrMatrix::zeros(0, 0),
            u: CsrMatrix::zeros(0, 0),
            row_perm: None,
            col_perm: None,
            row_scale: None,
            col_scale: None,
        }
    } else {
        factorize(diag, kind)?
    };
    let schur_contrib = contribution(&interior, border_row, border_col)?;
    Ok(SchurFactor {
        interior,
        border_row: border_row.clone(),
        border_col: border_col.clone(),
        schur_contrib,
    })
}

pub(crate) fn contribution<T: Scalar>(
    interior: &FactorBundle<T>,
    border_row: &CsrMatrix<T>,
    border_col: &CsrMatrix<T>,
) -> Result<CsrMatrix<T>, FactorError> {
    let nb = interior.dim();
    let ns = border_row.nrows();
    let cols_of_is = border_col.transpose();
    let mut rhs = vec![T::zero(); nb];
    let mut z = vec![T::zero(); nb];
    let mut work = vec![T::zero(); nb];
    let mut trip = Vec::new();
    for j in 0..ns {
        let (rows, vals) = cols_of_is.row(j);
        if rows.is_empty() {
            continue;
        }
        rhs.iter_mut().for_each(|v| *v = T::zero());
        for (&r, &v) in rows.iter().zip(vals) {
            rhs[r] = v;
        }
        interior.solve_into(&rhs, &mut z, &mut work)?;
        for i in 0..ns {
            let (c, v) = border_row.row(i);
            let mut acc = T::zero();
            for (&k, &x) in c.iter().zip(v) {
                acc += x * z[k];
            }
            if acc != T::zero() {
                trip.push((i, j, acc));
            }
        }
    }
    Ok(CsrMatrix::from_unsorted(ns, ns, trip)?)
}
