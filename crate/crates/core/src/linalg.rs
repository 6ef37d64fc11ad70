//! Thin SVD on nalgebra matrices, computed by faer.

use faer::Mat;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Svd {
    /// `m x r` left singular vectors, `r = min(m, n)`.
    pub u: DMatrix<f64>,
    /// Nonincreasing.
    pub singular_values: DVector<f64>,
    /// `r x n`.
    pub v_t: DMatrix<f64>,
}

impl Svd {
    pub fn recompose(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&self.singular_values) * &self.v_t
    }
}

pub fn thin_svd(m: &DMatrix<f64>) -> Result<Svd> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::Numerical("SVD of an empty matrix".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("SVD input is not finite".into()));
    }
    let f = Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)]);
    let svd = f.thin_svd().map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let r = rows.min(cols);
    Ok(Svd {
        u: DMatrix::from_fn(rows, r, |i, j| u[(i, j)]),
        singular_values: DVector::from_fn(r, |i, _| s[i]),
        v_t: DMatrix::from_fn(r, cols, |i, j| v[(j, i)]),
    })
}
