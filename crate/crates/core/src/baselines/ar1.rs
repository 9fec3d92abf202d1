//! Regression with AR(1) errors through the closed-form exact likelihood.
//!
//! Consecutive observed errors `u_j`, `u_{j-1}` at distance `d` satisfy
//! `u_j = φ^d u_{j-1} + e_j` with `Var(e_j) = σ²(1 - φ^{2d})/(1 - φ²)`, so the
//! concentrated likelihood needs no filter.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::arma::PACF_BOUND;
use crate::optim::golden_section;

pub(crate) struct Ar1Profile {
    pub loglik: f64,
    pub beta: DVector<f64>,
    pub sigma2: f64,
    pub gls_inv: DMatrix<f64>,
    pub n_obs: usize,
}

pub(crate) fn profile(phi: f64, y: &[f64], x: &DMatrix<f64>) -> Option<Ar1Profile> {
    let p = x.ncols();
    let one_minus = 1.0 - phi * phi;
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    let mut yty = 0.0;
    let mut sum_ln_f = 0.0;
    let mut prev: Option<usize> = None;
    let mut n_obs = 0;
    let mut xr = vec![0.0; p];
    for t in 0..y.len() {
        if y[t].is_nan() {
            continue;
        }
        let (yr, f) = match prev {
            None => {
                xr.iter_mut().enumerate().for_each(|(c, v)| *v = x[(t, c)]);
                (y[t], 1.0 / one_minus)
            }
            Some(s) => {
                let k = phi.powi((t - s) as i32);
                xr.iter_mut().enumerate().for_each(|(c, v)| *v = x[(t, c)] - k * x[(s, c)]);
                (y[t] - k * y[s], (1.0 - k * k) / one_minus)
            }
        };
        sum_ln_f += f.ln();
        yty += yr * yr / f;
        for i in 0..p {
            xty[i] += xr[i] * yr / f;
            for j in 0..p {
                xtx[(i, j)] += xr[i] * xr[j] / f;
            }
        }
        n_obs += 1;
        prev = Some(t);
    }
    if n_obs <= p {
        return None;
    }
    let chol = xtx.cholesky()?;
    let beta = chol.solve(&xty);
    let sigma2 = (yty - beta.dot(&xty)).max(0.0) / n_obs as f64;
    if !(sigma2 > 0.0) {
        return None;
    }
    let nf = n_obs as f64;
    let loglik = -0.5 * nf * ((2.0 * PI).ln() + sigma2.ln() + 1.0) - 0.5 * sum_ln_f;
    Some(Ar1Profile {
        loglik,
        beta,
        sigma2,
        gls_inv: chol.inverse(),
        n_obs,
    })
}

/// Maximizes the profile likelihood over `φ`: coarse scan, then golden
/// section around the best grid point.
pub(crate) fn maximize(y: &[f64], x: &DMatrix<f64>) -> Option<f64> {
    let neg = |phi: f64| profile(phi, y, x).map_or(f64::INFINITY, |p| -p.loglik);
    let grid: Vec<f64> = (-40..=40).map(|i| i as f64 / 40.0 * PACF_BOUND).collect();
    let best = (0..grid.len()).min_by(|&a, &b| neg(grid[a]).total_cmp(&neg(grid[b])))?;
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (phi, val) = golden_section(neg, lo, hi, 1e-12);
    val.is_finite().then_some(phi)
}
