use nalgebra::{DMatrix, DVector};

use super::EconError;

/// Columns whose largest demeaned entry is below this are treated as
/// constant within the fixed effects.
const ZERO_VARIANCE: f64 = 1e-8;
/// Relative residual norm below which a column counts as a combination of
/// the columns kept before it.
const COLLINEAR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    /// Indices of the input columns that were estimated, in input order.
    pub kept: Vec<usize>,
    /// Indices dropped as collinear with earlier columns.
    pub dropped: Vec<usize>,
    /// One estimate per kept column.
    pub coefficients: DVector<f64>,
    pub residuals: DVector<f64>,
    /// Upper-triangular factor of the kept columns, for the covariance.
    pub r: DMatrix<f64>,
}

impl OlsFit {
    /// `(X'X)^-1` of the kept columns.
    pub fn xtx_inverse(&self) -> DMatrix<f64> {
        let k = self.r.nrows();
        let r_inv = self
            .r
            .solve_upper_triangular(&DMatrix::identity(k, k))
            .expect("nonsingular after collinearity screening");
        &r_inv * r_inv.transpose()
    }
}

/// Least squares by Householder QR. Columns that are (numerically) linear
/// combinations of earlier ones are dropped, first-listed kept.
pub fn estimate_ols(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<OlsFit, EconError> {
    let (n, k) = x.shape();
    if y.len() != n || names.len() != k {
        return Err(EconError::Spec("regressor, outcome and name dimensions differ".into()));
    }
    if let Some(j) = (0..k).find(|&j| x.column(j).amax() <= ZERO_VARIANCE) {
        return Err(EconError::ZeroVariance(names[j].clone()));
    }

    // screen with modified Gram-Schmidt, orthogonalising twice
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let (mut kept, mut dropped) = (Vec::new(), Vec::new());
    for (j, name) in names.iter().enumerate().take(k) {
        let col = x.column(j).into_owned();
        let mut v = col.clone();
        for _ in 0..2 {
            for b in &basis {
                let d = b.dot(&v);
                v -= b * d;
            }
        }
        let norm = v.norm();
        if norm <= COLLINEAR * col.norm() {
            tracing::warn!(column = %name, "collinear regressor dropped");
            dropped.push(j);
        } else {
            basis.push(v / norm);
            kept.push(j);
        }
    }
    if kept.len() >= n {
        return Err(EconError::Spec(format!("{n} observations for {} regressors", kept.len())));
    }

    let xk = x.select_columns(&kept);
    let qr = xk.clone().qr();
    let (q, r) = (qr.q(), qr.r());
    let coefficients = r
        .solve_upper_triangular(&(q.transpose() * y))
        .ok_or_else(|| EconError::Spec("singular design after screening".into()))?;
    let residuals = y - &xk * &coefficients;
    Ok(OlsFit {
        kept,
        dropped,
        coefficients,
        residuals,
        r,
    })
}
