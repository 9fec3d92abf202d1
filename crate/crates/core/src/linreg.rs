//! Ordinary least squares with an explicit rank check.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coefficients: DVector<f64>,
    pub residuals: DVector<f64>,
    pub rss: f64,
    /// `(X'X)⁻¹`.
    pub xtx_inv: DMatrix<f64>,
}

impl LeastSquares {
    /// Residual variance `rss / (n - p)`.
    pub fn residual_variance(&self) -> f64 {
        let (n, p) = (self.residuals.len(), self.coefficients.len());
        self.rss / (n - p) as f64
    }

    /// Classical standard errors `sqrt(s² · diag((X'X)⁻¹))`.
    pub fn standard_errors(&self) -> Vec<f64> {
        let s2 = self.residual_variance();
        self.xtx_inv.diagonal().iter().map(|d| (s2 * d).sqrt()).collect()
    }
}

/// Columns of `x` that are (numerically) linear combinations of earlier
/// columns.
pub fn dependent_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut out = Vec::new();
    for j in 0..x.ncols() {
        let col = x.column(j).into_owned();
        let norm = col.norm();
        let mut r = col;
        for q in &basis {
            let c = q.dot(&r);
            r.axpy(-c, q, 1.0);
        }
        // second pass for stability
        for q in &basis {
            let c = q.dot(&r);
            r.axpy(-c, q, 1.0);
        }
        let rn = r.norm();
        if norm == 0.0 || rn <= RANK_TOL * norm.max(1.0) {
            out.push(j);
        } else {
            basis.push(r / rn);
        }
    }
    out
}

/// Least-squares fit of `y` on `x`. `names` label the columns in the
/// rank-deficiency error.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<LeastSquares> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::Internal("design and response lengths differ".into()));
    }
    if n <= p {
        return Err(Error::Data(format!("{n} observations for {p} regression coefficients")));
    }
    let dep = dependent_columns(x);
    if !dep.is_empty() {
        return Err(Error::RankDeficient(
            dep.iter()
                .map(|&j| names.get(j).cloned().unwrap_or_else(|| format!("column {j}")))
                .collect(),
        ));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let qty = qr.q().transpose() * y;
    let coefficients = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Numerical("singular triangular factor in least squares".into()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::Numerical("singular triangular factor in least squares".into()))?;
    let xtx_inv = &r_inv * r_inv.transpose();
    let residuals = y - x * &coefficients;
    let rss = residuals.norm_squared();
    Ok(LeastSquares {
        coefficients,
        residuals,
        rss,
        xtx_inv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let f = least_squares(&x, &y, &[]).unwrap();
        assert!((f.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((f.coefficients[1] - 2.0).abs() < 1e-12);
        assert!(f.rss < 1e-20);
    }

    #[test]
    fn collinear_column_named() {
        let x = DMatrix::from_row_slice(4, 3, &[
            1.0, 0.0, 2.0, //
            1.0, 1.0, 2.0, //
            1.0, 2.0, 2.0, //
            1.0, 3.0, 2.0,
        ]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 5.0]);
        let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        match least_squares(&x, &y, &names) {
            Err(Error::RankDeficient(cols)) => assert_eq!(cols, vec!["c".to_string()]),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn normal_equations_agree() {
        let x = DMatrix::from_fn(30, 3, |i, j| ((i * 7 + j * 13) % 11) as f64 + if j == 0 { 1.0 } else { 0.0 });
        let y = DVector::from_fn(30, |i, _| (i as f64).sin());
        let f = least_squares(&x, &y, &[]).unwrap();
        let xtx = x.transpose() * &x;
        let b = xtx.clone().cholesky().unwrap().solve(&(x.transpose() * &y));
        assert!((f.coefficients - b).amax() < 1e-10);
        assert!((f.xtx_inv * xtx - DMatrix::identity(3, 3)).amax() < 1e-10);
    }
}
