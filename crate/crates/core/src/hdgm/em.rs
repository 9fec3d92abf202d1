use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::kalman::{FitWindow, Smoothed};
use super::matern::{matern_cholesky, Smoothness};
use super::HdgmParams;
use crate::error::{Error, Result};
use crate::linreg::least_squares;
use crate::optim::golden_section;
use crate::panel::{DistanceMatrix, Panel, WindowSplit};

/// Allowed loglikelihood decrease between EM iterations before the fit is
/// aborted as a bug.
pub const MONOTONICITY_TOL: f64 = 1e-8;
const THETA_MIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmOptions {
    pub max_iter: usize,
    /// Relative loglikelihood change below which the fit has converged.
    pub tol: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            max_iter: 400,
            tol: 1e-6,
        }
    }
}

/// Result of an EM fit on the estimation window.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: HdgmParams,
    /// Loglikelihood at the initial value and after every iteration.
    pub loglik_trace: Vec<f64>,
    /// Smoothed states `ŵ_st` at the final parameters, `N × τ₀`.
    pub smoothed_states: DMatrix<f64>,
    pub smoothed_variances: DMatrix<f64>,
    /// Filtered state at the last estimation point.
    pub filtered_last: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

/// JSON form of a fitted HDGM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    #[serde(flatten)]
    pub params: HdgmParams,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn loglik(&self) -> f64 {
        *self.loglik_trace.last().expect("trace holds the initial loglik")
    }

    pub fn summary(&self) -> FitSummary {
        FitSummary {
            params: self.params.clone(),
            loglik: self.loglik(),
            iterations: self.iterations,
            converged: self.converged,
        }
    }
}

/// Starting values: pooled OLS for β, the residual variance split evenly
/// between `σ²_ε` and `ν`, `g = 0.5` and `θ` the median station distance.
pub fn initial_params(panel: &Panel, split: &WindowSplit, smoothness: Smoothness) -> Result<HdgmParams> {
    let window = FitWindow::from_panel(panel, split.estimation())?;
    initial_params_window(&window, panel.covariate_names(), smoothness)
}

fn observed_cells(window: &FitWindow) -> Vec<(usize, usize)> {
    let y = window.response();
    let mut cells = Vec::with_capacity(window.n_observed());
    for t in 0..y.ncols() {
        for s in 0..y.nrows() {
            if !y[(s, t)].is_nan() {
                cells.push((s, t));
            }
        }
    }
    cells
}

fn pooled_design(window: &FitWindow, cells: &[(usize, usize)]) -> DMatrix<f64> {
    let design = window.design();
    DMatrix::from_fn(cells.len(), design.len(), |i, k| {
        let (s, t) = cells[i];
        design[k][(s, t)]
    })
}

pub(crate) fn initial_params_window(
    window: &FitWindow,
    names: &[String],
    smoothness: Smoothness,
) -> Result<HdgmParams> {
    let cells = observed_cells(window);
    let x = pooled_design(window, &cells);
    let y = DVector::from_iterator(cells.len(), cells.iter().map(|&(s, t)| window.response()[(s, t)]));
    let ls = least_squares(&x, &y, names)?;
    let half = 0.5 * ls.residual_variance().max(1e-12);
    let theta = match window.distances().median_pairwise() {
        Some(d) if d > 0.0 => d,
        _ => 1.0,
    };
    Ok(HdgmParams {
        beta: ls.coefficients.iter().copied().collect(),
        g: 0.5,
        nu: half,
        theta,
        sigma2_eps: half,
        smoothness,
    })
}

/// Maximum-likelihood fit by EM on the estimation window.
pub fn em_fit(panel: &Panel, split: &WindowSplit, init: &HdgmParams, opts: &EmOptions) -> Result<FitResult> {
    let window = FitWindow::from_panel(panel, split.estimation())?;
    em_fit_window(&window, panel.covariate_names(), init, opts)
}

/// Sufficient statistics of the latent field from one E-step.
struct StateMoments {
    first: DMatrix<f64>,
    prev: DMatrix<f64>,
    cur: DMatrix<f64>,
    cross: DMatrix<f64>,
    n: usize,
    t: usize,
}

impl StateMoments {
    fn new(sm: &Smoothed) -> Self {
        let (n, t_len) = sm.means.shape();
        let second = |t: usize| -> DMatrix<f64> {
            let w = sm.means.column(t);
            &sm.covariances[t] + &w * w.transpose()
        };
        let mut prev = DMatrix::zeros(n, n);
        let mut cur = DMatrix::zeros(n, n);
        let mut cross = DMatrix::zeros(n, n);
        for t in 0..t_len {
            let e = second(t);
            if t + 1 < t_len {
                prev += &e;
            }
            if t > 0 {
                cur += &e;
                cross += &sm.lag_one[t - 1] + sm.means.column(t) * sm.means.column(t - 1).transpose();
            }
        }
        StateMoments {
            first: second(0),
            prev,
            cur,
            cross,
            n,
            t: t_len,
        }
    }
}

/// `tr(M⁻¹ S)` for the four moment sums, plus `ln|M|`.
struct Traces {
    first: f64,
    prev: f64,
    cur: f64,
    cross: f64,
    log_det: f64,
}

fn traces(mom: &StateMoments, dist: &DistanceMatrix, theta: f64, smoothness: Smoothness) -> Result<Traces> {
    let (_, chol) = matern_cholesky(dist, theta, smoothness)?;
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let minv = chol.inverse();
    let tr = |s: &DMatrix<f64>| minv.component_mul(&s.transpose()).sum();
    Ok(Traces {
        first: tr(&mom.first),
        prev: tr(&mom.prev),
        cur: tr(&mom.cur),
        cross: tr(&mom.cross),
        log_det,
    })
}

impl Traces {
    /// Expected quadratic form of the state equation, before division by ν.
    fn quadratic(&self, g: f64) -> f64 {
        (1.0 - g * g) * self.first + self.cur - 2.0 * g * self.cross + g * g * self.prev
    }
}

/// Maximizes `N ln(1-g²) - [(1-g²)a₁ - 2g·a_c + g²·a_p]/ν` over `|g| < 1`.
fn update_g(tr: &Traces, n: usize, nu: f64, g_old: f64) -> f64 {
    let n = n as f64;
    let objective = |g: f64| n * (1.0 - g * g).ln() - (tr.quadratic(g) - tr.cur) / nu;
    let deriv = |g: f64| -2.0 * n * g / (1.0 - g * g) + (2.0 * g * tr.first + 2.0 * tr.cross - 2.0 * g * tr.prev) / nu;
    let (mut lo, mut hi) = (-1.0 + 1e-12, 1.0 - 1e-12);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if deriv(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let g_new = 0.5 * (lo + hi);
    if objective(g_new) >= objective(g_old) {
        g_new
    } else {
        g_old
    }
}

pub(crate) fn em_fit_window(
    window: &FitWindow,
    names: &[String],
    init: &HdgmParams,
    opts: &EmOptions,
) -> Result<FitResult> {
    init.validate()?;
    let p = window.n_covariates();
    if init.beta.len() != p {
        return Err(Error::Parameter(format!(
            "initial beta has length {}, design has {p} covariates",
            init.beta.len()
        )));
    }
    let cells = observed_cells(window);
    if cells.len() < 10 * p.max(1) {
        return Err(Error::Data(format!(
            "estimation window has {} observations, at least {} needed",
            cells.len(),
            10 * p.max(1)
        )));
    }
    let x = pooled_design(window, &cells);
    let (n, t_len) = (window.n_stations(), window.n_times());
    let theta_hi = (10.0 * window.distances().diameter()).max(10.0 * THETA_MIN);
    let (ln_lo, ln_hi) = (THETA_MIN.ln(), theta_hi.ln());

    let mut params = init.clone();
    let mut sm = window.smooth(&params)?;
    let mut trace = vec![sm.loglik];
    let mut converged = false;
    let mut iterations = 0;
    let mut warnings = Vec::new();

    while iterations < opts.max_iter {
        let mut next = params.clone();

        // β and σ²_ε
        let target = DVector::from_iterator(
            cells.len(),
            cells.iter().map(|&(s, t)| window.response()[(s, t)] - sm.means[(s, t)]),
        );
        let ls = least_squares(&x, &target, names)?;
        let v_sum: f64 = cells.iter().map(|&(s, t)| sm.covariances[t][(s, s)]).sum();
        next.beta = ls.coefficients.iter().copied().collect();
        next.sigma2_eps = (ls.rss + v_sum) / cells.len() as f64;

        let mom = StateMoments::new(&sm);
        let tn = (mom.t * mom.n) as f64;

        // g given the old ν and θ
        if t_len > 1 {
            let tr = traces(&mom, window.distances(), params.theta, params.smoothness)?;
            next.g = update_g(&tr, n, params.nu, params.g);
        }

        // (θ, ν) jointly through the profile in θ
        let g = next.g;
        if n > 1 {
            let profile = |ln_theta: f64| -> f64 {
                match traces(&mom, window.distances(), ln_theta.exp(), params.smoothness) {
                    Ok(tr) => {
                        let q = tr.quadratic(g);
                        if q > 0.0 {
                            0.5 * (mom.t as f64 * tr.log_det + tn * (q / tn).ln())
                        } else {
                            f64::INFINITY
                        }
                    }
                    Err(_) => f64::INFINITY,
                }
            };
            let (ln_best, val_best) = golden_section(profile, ln_lo, ln_hi, 1e-8);
            let old_val = profile(params.theta.ln());
            if val_best < old_val {
                next.theta = ln_best.exp();
            }
        }
        let tr = traces(&mom, window.distances(), next.theta, params.smoothness)?;
        next.nu = tr.quadratic(g) / tn;
        next.validate().map_err(|e| Error::Numerical(format!("EM produced invalid parameters: {e}")))?;

        let prev_ll = *trace.last().expect("non-empty trace");
        sm = window.smooth(&next)?;
        params = next;
        iterations += 1;
        trace.push(sm.loglik);
        if sm.loglik < prev_ll - MONOTONICITY_TOL {
            return Err(Error::Internal(format!(
                "EM loglikelihood decreased from {prev_ll} to {} at iteration {iterations}",
                sm.loglik
            )));
        }
        if ((sm.loglik - prev_ll) / prev_ll.abs()).abs() < opts.tol {
            converged = true;
            break;
        }
    }

    if n > 1 {
        let ln_theta = params.theta.ln();
        if (ln_theta - ln_lo).abs() < 1e-3 || (ln_theta - ln_hi).abs() < 1e-3 {
            let msg = format!("spatial range θ = {:.4} km ended at a search bound", params.theta);
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    if !converged {
        let msg = format!("EM did not converge in {} iterations", opts.max_iter);
        log::warn!("{msg}");
        warnings.push(msg);
    }

    Ok(FitResult {
        smoothed_variances: sm.variances(),
        smoothed_states: sm.means,
        filtered_last: sm.last_filtered,
        params,
        loglik_trace: trace,
        converged,
        iterations,
        warnings,
    })
}
