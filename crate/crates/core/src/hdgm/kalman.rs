use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use super::matern::matern_cholesky;
use super::HdgmParams;
use crate::error::{Error, Result};
use crate::panel::{distance_matrix, DistanceMatrix, Panel, WindowSplit};

/// Response, covariates and station geometry over one fitting range.
#[derive(Debug, Clone)]
pub struct FitWindow {
    y: DMatrix<f64>,
    design: Vec<DMatrix<f64>>,
    distances: DistanceMatrix,
}

impl FitWindow {
    /// `y` is `N × T` (`NaN` = missing); each design matrix is `N × T` and
    /// must be finite.
    pub fn new(y: DMatrix<f64>, design: Vec<DMatrix<f64>>, distances: DistanceMatrix) -> Result<Self> {
        let (n, t) = y.shape();
        if distances.len() != n {
            return Err(Error::Data(format!(
                "distance matrix has {} stations, response has {n}",
                distances.len()
            )));
        }
        for x in &design {
            if x.shape() != (n, t) {
                return Err(Error::Data("design matrix shape differs from response".into()));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data("covariates must be complete on the fitting range".into()));
            }
        }
        Ok(FitWindow { y, design, distances })
    }

    pub fn from_panel(panel: &Panel, range: Range<usize>) -> Result<Self> {
        let cols: Vec<usize> = range.collect();
        let y = panel.observations().select_columns(cols.iter());
        let design = (0..panel.n_covariates())
            .map(|k| panel.covariate(k).select_columns(cols.iter()))
            .collect();
        FitWindow::new(y, design, distance_matrix(panel))
    }

    pub fn n_stations(&self) -> usize {
        self.y.nrows()
    }

    pub fn n_times(&self) -> usize {
        self.y.ncols()
    }

    pub fn n_covariates(&self) -> usize {
        self.design.len()
    }

    pub fn response(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn design(&self) -> &[DMatrix<f64>] {
        &self.design
    }

    pub fn distances(&self) -> &DistanceMatrix {
        &self.distances
    }

    pub fn n_observed(&self) -> usize {
        self.y.iter().filter(|v| !v.is_nan()).count()
    }

    /// Regression surface `x_st'β`, `N × T`.
    pub fn offsets(&self, beta: &[f64]) -> Result<DMatrix<f64>> {
        if beta.len() != self.design.len() {
            return Err(Error::Parameter(format!(
                "beta has length {}, design has {} covariates",
                beta.len(),
                self.design.len()
            )));
        }
        let mut out = DMatrix::zeros(self.n_stations(), self.n_times());
        for (b, x) in beta.iter().zip(&self.design) {
            out += x * *b;
        }
        Ok(out)
    }

    /// Loglikelihood of `params` on this window.
    pub fn loglik(&self, params: &HdgmParams) -> Result<f64> {
        let ss = StateSpaceRep::new(self, params)?;
        Ok(run_filter(&ss, &self.y, false)?.loglik)
    }

    pub fn filter(&self, params: &HdgmParams) -> Result<Filtered> {
        let ss = StateSpaceRep::new(self, params)?;
        run_filter(&ss, &self.y, true)
    }

    pub fn smooth(&self, params: &HdgmParams) -> Result<Smoothed> {
        let ss = StateSpaceRep::new(self, params)?;
        let f = run_filter(&ss, &self.y, true)?;
        smooth(&ss, f)
    }
}

/// Linear Gaussian state-space form of the HDGM on a fitting window.
#[derive(Debug, Clone)]
pub struct StateSpaceRep {
    /// Scalar transition `g` (the transition matrix is `g·I`).
    pub transition: f64,
    /// `Γ = ν·M(θ)`.
    pub state_noise_cov: DMatrix<f64>,
    /// Stationary covariance of the first state.
    pub initial_cov: DMatrix<f64>,
    pub obs_noise_var: f64,
    /// `x_st'β`, `N × T`.
    pub offsets: DMatrix<f64>,
}

impl StateSpaceRep {
    pub fn new(window: &FitWindow, params: &HdgmParams) -> Result<Self> {
        params.validate()?;
        let (corr, _) = matern_cholesky(&window.distances, params.theta, params.smoothness)?;
        let gamma = corr * params.nu;
        Ok(StateSpaceRep {
            transition: params.g,
            initial_cov: &gamma / (1.0 - params.g * params.g),
            state_noise_cov: gamma,
            obs_noise_var: params.sigma2_eps,
            offsets: window.offsets(&params.beta)?,
        })
    }
}

/// Kalman filter output. Index `t` refers to the `t`-th point of the window.
#[derive(Debug, Clone)]
pub struct Filtered {
    pub loglik: f64,
    pub predicted_mean: Vec<DVector<f64>>,
    pub predicted_cov: Vec<DMatrix<f64>>,
    pub filtered_mean: Vec<DVector<f64>>,
    pub filtered_cov: Vec<DMatrix<f64>>,
}

impl Filtered {
    /// Filtered state at the last point of the window.
    pub fn last_state(&self) -> &DVector<f64> {
        self.filtered_mean.last().expect("non-empty window")
    }
}

/// Fixed-interval smoother output.
#[derive(Debug, Clone)]
pub struct Smoothed {
    pub loglik: f64,
    /// `E[w_t | y]`, `N × T`.
    pub means: DMatrix<f64>,
    /// `Var[w_t | y]`.
    pub covariances: Vec<DMatrix<f64>>,
    /// `Cov[w_{t+1}, w_t | y]` for `t = 0..T-1`.
    pub lag_one: Vec<DMatrix<f64>>,
    /// Filtered state at the last point, used for forecasting.
    pub last_filtered: DVector<f64>,
}

impl Smoothed {
    /// Smoothed marginal variances, `N × T`.
    pub fn variances(&self) -> DMatrix<f64> {
        let n = self.means.nrows();
        DMatrix::from_fn(n, self.covariances.len(), |s, t| self.covariances[t][(s, s)])
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn run_filter(ss: &StateSpaceRep, y: &DMatrix<f64>, store: bool) -> Result<Filtered> {
    let (n, t_len) = y.shape();
    let g = ss.transition;
    let mut out = Filtered {
        loglik: 0.0,
        predicted_mean: Vec::new(),
        predicted_cov: Vec::new(),
        filtered_mean: Vec::new(),
        filtered_cov: Vec::new(),
    };
    let mut a = DVector::zeros(n);
    let mut p = ss.initial_cov.clone();
    let ln2pi = (2.0 * PI).ln();

    for t in 0..t_len {
        let obs: Vec<usize> = (0..n).filter(|&s| !y[(s, t)].is_nan()).collect();
        let (m, c) = if obs.is_empty() {
            (a.clone(), p.clone())
        } else {
            let k = obs.len();
            let v = DVector::from_iterator(
                k,
                obs.iter().map(|&s| y[(s, t)] - ss.offsets[(s, t)] - a[s]),
            );
            let p_cols = p.select_columns(obs.iter());
            let mut f = p_cols.select_rows(obs.iter());
            for i in 0..k {
                f[(i, i)] += ss.obs_noise_var;
            }
            let chol = f.cholesky().ok_or_else(|| {
                Error::Numerical(format!("innovation covariance not positive definite at t = {t}"))
            })?;
            let finv_v = chol.solve(&v);
            let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().take(k).map(|d| d.ln()).sum::<f64>();
            let ll = -0.5 * (k as f64 * ln2pi + log_det + v.dot(&finv_v));
            if !ll.is_finite() {
                return Err(Error::Numerical(format!("non-finite likelihood at t = {t}")));
            }
            out.loglik += ll;
            let m = &a + &p_cols * finv_v;
            let gain_t = chol.solve(&p_cols.transpose());
            let mut c = &p - &p_cols * gain_t;
            symmetrize(&mut c);
            (m, c)
        };

        let a_next = &m * g;
        let mut p_next = &c * (g * g) + &ss.state_noise_cov;
        symmetrize(&mut p_next);

        if store {
            out.predicted_mean.push(a);
            out.predicted_cov.push(p);
            out.filtered_mean.push(m);
            out.filtered_cov.push(c);
        } else if t + 1 == t_len {
            out.filtered_mean.push(m);
            out.filtered_cov.push(c);
        }
        a = a_next;
        p = p_next;
    }
    Ok(out)
}

fn smooth(ss: &StateSpaceRep, f: Filtered) -> Result<Smoothed> {
    let t_len = f.filtered_mean.len();
    let n = ss.state_noise_cov.nrows();
    let g = ss.transition;
    let mut means = DMatrix::zeros(n, t_len);
    let mut covs = vec![DMatrix::zeros(n, n); t_len];
    let mut lag_one = vec![DMatrix::zeros(n, n); t_len.saturating_sub(1)];

    let last = t_len - 1;
    means.set_column(last, &f.filtered_mean[last]);
    covs[last] = f.filtered_cov[last].clone();
    let mut w_next = f.filtered_mean[last].clone();

    for t in (0..last).rev() {
        let chol = f.predicted_cov[t + 1].clone().cholesky().ok_or_else(|| {
            Error::Numerical(format!("predicted covariance not positive definite at t = {}", t + 1))
        })?;
        // J_t' = P_{t+1}^{-1} (g C_t)
        let jt = chol.solve(&(&f.filtered_cov[t] * g));
        let j = jt.transpose();
        let w = &f.filtered_mean[t] + &j * (&w_next - &f.predicted_mean[t + 1]);
        let mut v = &f.filtered_cov[t] + &j * (&covs[t + 1] - &f.predicted_cov[t + 1]) * &jt;
        symmetrize(&mut v);
        lag_one[t] = &covs[t + 1] * &jt;
        means.set_column(t, &w);
        covs[t] = v;
        w_next = w;
    }

    Ok(Smoothed {
        loglik: f.loglik,
        means,
        covariances: covs,
        lag_one,
        last_filtered: f.filtered_mean[last].clone(),
    })
}

/// Exact Gaussian loglikelihood of the estimation-window observations.
pub fn kalman_loglik(panel: &Panel, split: &WindowSplit, params: &HdgmParams) -> Result<f64> {
    FitWindow::from_panel(panel, split.estimation())?.loglik(params)
}

/// Kalman filter over the estimation window.
pub fn kalman_filter(panel: &Panel, split: &WindowSplit, params: &HdgmParams) -> Result<Filtered> {
    FitWindow::from_panel(panel, split.estimation())?.filter(params)
}

/// Smoothed latent states over the estimation window.
pub fn kalman_smooth(panel: &Panel, split: &WindowSplit, params: &HdgmParams) -> Result<Smoothed> {
    FitWindow::from_panel(panel, split.estimation())?.smooth(params)
}

/// Normal values `x'β + g^h·w_{T₁|T₁}` over `range`, the `h`-th column
/// being `h` steps after the state `state`.
pub fn forecast_from_state(
    panel: &Panel,
    range: Range<usize>,
    params: &HdgmParams,
    state: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let n = panel.n_stations();
    if state.len() != n {
        return Err(Error::Data("state dimension differs from station count".into()));
    }
    if params.beta.len() != panel.n_covariates() {
        return Err(Error::Parameter("beta length differs from covariate count".into()));
    }
    let mut out = DMatrix::zeros(n, range.len());
    let mut x = vec![0.0; panel.n_covariates()];
    for (h, t) in range.enumerate() {
        let decay = params.g.powi(h as i32 + 1);
        for s in 0..n {
            panel.design_row_into(s, t, &mut x);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "missing covariate for station `{}` at {}",
                    panel.stations()[s].id,
                    panel.timeline()[t]
                )));
            }
            let reg: f64 = x.iter().zip(&params.beta).map(|(a, b)| a * b).sum();
            out[(s, h)] = reg + decay * state[s];
        }
    }
    Ok(out)
}

/// Event-window normal values from the filtered state at the end of the
/// estimation window. Event-window observations are never read.
pub fn forecast_normal(panel: &Panel, split: &WindowSplit, params: &HdgmParams) -> Result<DMatrix<f64>> {
    let f = kalman_filter(panel, split, params)?;
    forecast_from_state(panel, split.event(), params, f.last_state())
}
