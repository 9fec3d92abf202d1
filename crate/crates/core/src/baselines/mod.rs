//! Per-station temporal baselines: linear regression with iid errors,
//! regression with AR(1) errors and regression with ARMA(p, q) errors
//! selected by AICc.

mod ar1;
mod arma;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linreg::{dependent_columns, least_squares};
use crate::optim::{bfgs, BfgsOptions};
use crate::panel::{Panel, WindowSplit};
use arma::{roots_clear, unpack, ArmaSystem, PACF_BOUND};

pub const MAX_ORDER: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "lm")]
    Lm,
    #[serde(rename = "regAR1")]
    RegAr1,
    #[serde(rename = "regARMA")]
    RegArma,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Lm => "lm",
            ModelKind::RegAr1 => "regAR1",
            ModelKind::RegArma => "regARMA",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lm" => Ok(ModelKind::Lm),
            "regAR1" => Ok(ModelKind::RegAr1),
            "regARMA" => Ok(ModelKind::RegArma),
            _ => Err(Error::Config(format!("unknown baseline model `{s}` (lm, regAR1, regARMA)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArmaOrder {
    pub p_ar: usize,
    pub q_ma: usize,
}

impl ArmaOrder {
    pub fn new(p_ar: usize, q_ma: usize) -> Result<Self> {
        if p_ar > MAX_ORDER || q_ma > MAX_ORDER {
            return Err(Error::Parameter(format!(
                "ARMA order ({p_ar}, {q_ma}) outside 0..={MAX_ORDER}"
            )));
        }
        Ok(ArmaOrder { p_ar, q_ma })
    }

    /// All orders `(0,0)…(7,7)`.
    pub fn grid() -> Vec<ArmaOrder> {
        (0..=MAX_ORDER)
            .flat_map(|p| (0..=MAX_ORDER).map(move |q| ArmaOrder { p_ar: p, q_ma: q }))
            .collect()
    }
}

impl fmt::Display for ArmaOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.p_ar, self.q_ma)
    }
}

/// A fitted per-station baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineFit {
    pub station_id: String,
    pub kind: ModelKind,
    pub order: ArmaOrder,
    pub coefficients: Vec<f64>,
    pub coefficient_se: Vec<f64>,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    /// Standard errors of `ar` then `ma`; `None` when the observed
    /// information is not positive definite.
    pub arma_se: Option<Vec<f64>>,
    /// ML innovation variance.
    pub sigma2: f64,
    /// `rss / (n - p)` for lm, the innovation variance otherwise.
    pub residual_variance: f64,
    pub loglik: f64,
    pub aicc: f64,
    pub n_obs: usize,
    /// Predicted error state after the last estimation point.
    pub terminal_state: Vec<f64>,
    pub converged: bool,
}

/// One row of the per-station summary CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummaryRow {
    pub station_id: String,
    pub model_kind: ModelKind,
    pub p_ar: usize,
    pub q_ma: usize,
    pub aicc: f64,
    pub residual_variance: f64,
}

impl BaselineFit {
    pub fn summary_row(&self) -> BaselineSummaryRow {
        BaselineSummaryRow {
            station_id: self.station_id.clone(),
            model_kind: self.kind,
            p_ar: self.order.p_ar,
            q_ma: self.order.q_ma,
            aicc: self.aicc,
            residual_variance: self.residual_variance,
        }
    }

    fn regression(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x.ncols() != self.coefficients.len() {
            return Err(Error::Data(format!(
                "design has {} columns, fit has {} coefficients",
                x.ncols(),
                self.coefficients.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("missing covariate for station `{}`", self.station_id)));
        }
        Ok(x * DVector::from_column_slice(&self.coefficients))
    }
}

fn aicc(loglik: f64, k: usize, n: usize) -> f64 {
    let (k, n) = (k as f64, n as f64);
    -2.0 * loglik + 2.0 * k + 2.0 * k * (k + 1.0) / (n - k - 1.0)
}

fn check_inputs(y: &[f64], x: &DMatrix<f64>, names: &[String]) -> Result<(Vec<usize>, usize)> {
    if x.nrows() != y.len() {
        return Err(Error::Data("series and design lengths differ".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("covariates must be complete on the estimation window".into()));
    }
    let rows: Vec<usize> = (0..y.len()).filter(|&t| !y[t].is_nan()).collect();
    let p = x.ncols();
    if rows.len() < p + 3 {
        return Err(Error::Data(format!(
            "{} observations for {p} regression coefficients",
            rows.len()
        )));
    }
    let xo = x.select_rows(rows.iter());
    let dep = dependent_columns(&xo);
    if !dep.is_empty() {
        return Err(Error::RankDeficient(
            dep.iter()
                .map(|&j| names.get(j).cloned().unwrap_or_else(|| format!("column {j}")))
                .collect(),
        ));
    }
    let n = rows.len();
    Ok((rows, n))
}

/// Ordinary least squares on the non-missing rows.
pub fn fit_lm(station_id: &str, y: &[f64], x: &DMatrix<f64>, names: &[String]) -> Result<BaselineFit> {
    let (rows, n) = check_inputs(y, x, names)?;
    let xo = x.select_rows(rows.iter());
    let yo = DVector::from_iterator(n, rows.iter().map(|&t| y[t]));
    let ls = least_squares(&xo, &yo, names)?;
    let p = x.ncols();
    let sigma2 = ls.rss / n as f64;
    let loglik = -0.5 * n as f64 * ((2.0 * std::f64::consts::PI).ln() + sigma2.ln() + 1.0);
    Ok(BaselineFit {
        station_id: station_id.to_string(),
        kind: ModelKind::Lm,
        order: ArmaOrder { p_ar: 0, q_ma: 0 },
        coefficients: ls.coefficients.iter().copied().collect(),
        coefficient_se: ls.standard_errors(),
        ar: Vec::new(),
        ma: Vec::new(),
        arma_se: Some(Vec::new()),
        sigma2,
        residual_variance: ls.residual_variance(),
        loglik,
        aicc: aicc(loglik, p + 1, n),
        n_obs: n,
        terminal_state: Vec::new(),
        converged: true,
    })
}

/// Negative-Hessian standard errors of `f` at `x` by central differences.
fn hessian_se<F: Fn(&[f64]) -> Option<f64>>(f: F, x: &[f64]) -> Option<Vec<f64>> {
    let d = x.len();
    if d == 0 {
        return Some(Vec::new());
    }
    let h: Vec<f64> = x.iter().map(|v| 1e-4 * v.abs().max(1.0)).collect();
    let f0 = f(x)?;
    let mut hess = DMatrix::zeros(d, d);
    let at = |i: usize, si: f64, j: usize, sj: f64| -> Option<f64> {
        let mut z = x.to_vec();
        z[i] += si * h[i];
        z[j] += sj * h[j];
        f(&z)
    };
    for i in 0..d {
        let fp = at(i, 1.0, i, 0.0)?;
        let fm = at(i, -1.0, i, 0.0)?;
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let v = (at(i, 1.0, j, 1.0)? - at(i, 1.0, j, -1.0)? - at(i, -1.0, j, 1.0)? + at(i, -1.0, j, -1.0)?)
                / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    let info = -hess;
    let inv = info.cholesky()?.inverse();
    let se: Vec<f64> = inv.diagonal().iter().map(|v| v.sqrt()).collect();
    se.iter().all(|v| v.is_finite()).then_some(se)
}

/// Regression with AR(1) errors via the closed-form exact likelihood.
pub fn fit_reg_ar1(station_id: &str, y: &[f64], x: &DMatrix<f64>, names: &[String]) -> Result<BaselineFit> {
    check_inputs(y, x, names)?;
    let phi = ar1::maximize(y, x)
        .ok_or_else(|| Error::Numerical(format!("regAR1 likelihood undefined for station `{station_id}`")))?;
    if phi.abs() >= PACF_BOUND - 1e-6 || !roots_clear(&[phi], &[]) {
        return Err(Error::Numerical(format!(
            "regAR1 optimum is nonstationary for station `{station_id}` (phi = {phi})"
        )));
    }
    let pr = ar1::profile(phi, y, x).expect("profile defined at the optimum");
    let sys = ArmaSystem::new(&[phi], &[]).expect("stationary AR(1)");
    let terminal = error_filter(&sys, y, x, pr.beta.as_slice()).1;
    let k = x.ncols() + 2;
    let se = hessian_se(|z| ar1::profile(z[0], y, x).map(|p| p.loglik), &[phi]);
    Ok(BaselineFit {
        station_id: station_id.to_string(),
        kind: ModelKind::RegAr1,
        order: ArmaOrder { p_ar: 1, q_ma: 0 },
        coefficients: pr.beta.iter().copied().collect(),
        coefficient_se: pr.gls_inv.diagonal().iter().map(|v| (pr.sigma2 * v).sqrt()).collect(),
        ar: vec![phi],
        ma: Vec::new(),
        arma_se: se,
        sigma2: pr.sigma2,
        residual_variance: pr.sigma2,
        loglik: pr.loglik,
        aicc: aicc(pr.loglik, k, pr.n_obs),
        n_obs: pr.n_obs,
        terminal_state: terminal,
        converged: true,
    })
}

/// One-step error predictions and terminal state for fixed coefficients.
fn error_filter(sys: &ArmaSystem, y: &[f64], x: &DMatrix<f64>, beta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let u: Vec<f64> = (0..y.len())
        .map(|t| y[t] - (0..beta.len()).map(|c| x[(t, c)] * beta[c]).sum::<f64>())
        .collect();
    let empty = DMatrix::zeros(y.len(), 0);
    match arma::profile(sys, &u, &empty, true) {
        Some(p) => (p.one_step, p.terminal_state),
        None => (vec![0.0; y.len()], vec![0.0; sys.dim()]),
    }
}

/// Fits one order from the best of `starts` (unconstrained coordinates);
/// returns the fit and its optimum in those coordinates.
fn fit_arma_inner(
    station_id: &str,
    y: &[f64],
    x: &DMatrix<f64>,
    order: ArmaOrder,
    starts: &[Vec<f64>],
    with_se: bool,
) -> Result<(BaselineFit, Vec<f64>)> {
    let (p, q) = (order.p_ar, order.q_ma);
    let dim = p + q;
    let neg = |u: &[f64]| -> f64 {
        let (ar, ma, _) = unpack(u, p, q);
        ArmaSystem::new(&ar, &ma)
            .and_then(|s| arma::profile(&s, y, x, false))
            .map_or(f64::INFINITY, |pr| -pr.loglik)
    };
    let (u, converged) = if dim == 0 {
        (Vec::new(), true)
    } else {
        let zero = vec![0.0; dim];
        let start = starts
            .iter()
            .filter(|s| s.len() == dim)
            .map(|s| (s, neg(s)))
            .chain(std::iter::once((&zero, neg(&zero))))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(s, _)| s.clone())
            .unwrap_or(zero);
        let r = bfgs(
            neg,
            &start,
            BfgsOptions {
                max_iter: 200,
                f_tol: 1e-12,
                ..Default::default()
            },
        );
        log::trace!("ARMA{order}: BFGS {} evaluations, converged {}", r.evaluations, r.converged);
        (r.x, r.converged)
    };
    let (ar, ma, max_pacf) = unpack(&u, p, q);
    if max_pacf > PACF_BOUND || !roots_clear(&ar, &ma) {
        return Err(Error::Numerical(format!(
            "ARMA{order} optimum on the stationarity/invertibility boundary for station `{station_id}`"
        )));
    }
    let sys = ArmaSystem::new(&ar, &ma)
        .ok_or_else(|| Error::Numerical(format!("ARMA{order} system not stationary")))?;
    let pr = arma::profile(&sys, y, x, true)
        .ok_or_else(|| Error::Numerical(format!("ARMA{order} likelihood undefined for station `{station_id}`")))?;
    let k = x.ncols() + dim + 1;
    if pr.n_obs <= k + 1 {
        return Err(Error::Data(format!("too few observations for ARMA{order}")));
    }
    let arma_se = if with_se {
        let natural: Vec<f64> = ar.iter().chain(&ma).copied().collect();
        hessian_se(
            |z| {
                let s = ArmaSystem::new(&z[..p], &z[p..])?;
                arma::profile(&s, y, x, false).map(|r| r.loglik)
            },
            &natural,
        )
    } else {
        None
    };
    let fit = BaselineFit {
        station_id: station_id.to_string(),
        kind: ModelKind::RegArma,
        order,
        coefficients: pr.beta.iter().copied().collect(),
        coefficient_se: pr.gls_inv.diagonal().iter().map(|v| (pr.sigma2 * v).sqrt()).collect(),
        ar,
        ma,
        arma_se,
        sigma2: pr.sigma2,
        residual_variance: pr.sigma2,
        loglik: pr.loglik,
        aicc: aicc(pr.loglik, k, pr.n_obs),
        n_obs: pr.n_obs,
        terminal_state: pr.terminal_state,
        converged,
    };
    Ok((fit, u))
}

/// Exact-ML regression with ARMA(p, q) errors.
pub fn fit_regarma(
    station_id: &str,
    y: &[f64],
    x: &DMatrix<f64>,
    names: &[String],
    order: ArmaOrder,
) -> Result<BaselineFit> {
    check_inputs(y, x, names)?;
    fit_arma_inner(station_id, y, x, order, &[], true).map(|(f, _)| f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub order: ArmaOrder,
    /// `None` when the fit failed or did not converge.
    pub aicc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct OrderSelection {
    pub order: ArmaOrder,
    pub fit: BaselineFit,
    pub grid: Vec<GridCell>,
}

/// Fits every order in `(0,0)…(7,7)` and keeps the smallest AICc; ties go to
/// the smaller `p + q`, then the smaller `p`. Failed or non-converged cells
/// are skipped.
pub fn select_order_aicc(station_id: &str, y: &[f64], x: &DMatrix<f64>, names: &[String]) -> Result<OrderSelection> {
    select_order_in(station_id, y, x, names, &ArmaOrder::grid())
}

pub(crate) fn select_order_in(
    station_id: &str,
    y: &[f64],
    x: &DMatrix<f64>,
    names: &[String],
    orders: &[ArmaOrder],
) -> Result<OrderSelection> {
    check_inputs(y, x, names)?;
    let mut sorted = orders.to_vec();
    sorted.sort_by_key(|o| (o.p_ar, o.q_ma));
    let mut optima: HashMap<ArmaOrder, Vec<f64>> = HashMap::new();
    let mut fits: Vec<(ArmaOrder, Option<BaselineFit>)> = Vec::with_capacity(sorted.len());
    for o in sorted {
        // nested neighbours padded with a zero partial autocorrelation
        let mut starts = Vec::new();
        if o.p_ar > 0 {
            if let Some(u) = optima.get(&ArmaOrder { p_ar: o.p_ar - 1, q_ma: o.q_ma }) {
                let mut v = u.clone();
                v.insert(o.p_ar - 1, 0.0);
                starts.push(v);
            }
        }
        if o.q_ma > 0 {
            if let Some(u) = optima.get(&ArmaOrder { p_ar: o.p_ar, q_ma: o.q_ma - 1 }) {
                let mut v = u.clone();
                v.push(0.0);
                starts.push(v);
            }
        }
        let fit = match fit_arma_inner(station_id, y, x, o, &starts, false) {
            Ok((f, u)) => {
                optima.insert(o, u);
                Some(f).filter(|f| f.converged && f.aicc.is_finite())
            }
            Err(_) => None,
        };
        fits.push((o, fit));
    }
    let grid = fits
        .iter()
        .map(|(o, f)| GridCell {
            order: *o,
            aicc: f.as_ref().map(|f| f.aicc),
        })
        .collect();
    let best = fits
        .into_iter()
        .filter_map(|(o, f)| f.map(|f| (o, f)))
        .min_by(|(oa, fa), (ob, fb)| {
            fa.aicc
                .total_cmp(&fb.aicc)
                .then((oa.p_ar + oa.q_ma).cmp(&(ob.p_ar + ob.q_ma)))
                .then(oa.p_ar.cmp(&ob.p_ar))
        });
    let (order, _) = best.ok_or_else(|| {
        Error::Numerical(format!("every ARMA order failed for station `{station_id}`"))
    })?;
    let start = optima.remove(&order).expect("selected order has an optimum");
    let (fit, _) = fit_arma_inner(station_id, y, x, order, &[start], true)?;
    Ok(OrderSelection { order, fit, grid })
}

/// Error-model state after `h` steps, `Z T^{h-1} a_{n+1}` for `h = 1…`.
fn error_forecasts(fit: &BaselineFit, horizon: usize) -> Vec<f64> {
    if fit.terminal_state.is_empty() {
        return vec![0.0; horizon];
    }
    let sys = ArmaSystem::new(&fit.ar, &fit.ma).expect("accepted fits are stationary");
    let mut a = fit.terminal_state.clone();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        out.push(a[0]);
        a = sys.transition(&a);
    }
    out
}

/// Event-window normal values: regression surface plus the decaying ARMA
/// error forecast from the end of the estimation window. `x_event` is
/// `τ₁ × p`.
pub fn forecast_baseline(fit: &BaselineFit, x_event: &DMatrix<f64>) -> Result<Vec<f64>> {
    let reg = fit.regression(x_event)?;
    let err = error_forecasts(fit, x_event.nrows());
    Ok(reg.iter().zip(err).map(|(r, e)| r + e).collect())
}

/// In-sample normal values: regression surface plus the one-step ARMA
/// prediction of the error.
pub fn in_sample_normal(fit: &BaselineFit, y: &[f64], x: &DMatrix<f64>) -> Result<Vec<f64>> {
    let reg = fit.regression(x)?;
    if fit.kind == ModelKind::Lm {
        return Ok(reg.iter().copied().collect());
    }
    let sys = ArmaSystem::new(&fit.ar, &fit.ma)
        .ok_or_else(|| Error::Parameter("stored ARMA coefficients are not stationary".into()))?;
    let (steps, _) = error_filter(&sys, y, x, &fit.coefficients);
    Ok(reg.iter().zip(steps).map(|(r, e)| r + e).collect())
}

/// Fits `kind` to every station on the estimation window. Stations whose
/// whole ARMA grid fails fall back to lm; each fallback adds a warning.
pub fn fit_panel_baselines(
    panel: &Panel,
    split: &WindowSplit,
    kind: ModelKind,
) -> Result<(Vec<BaselineFit>, Vec<String>)> {
    let names = panel.covariate_names();
    let results: Vec<Result<(BaselineFit, Option<String>)>> = (0..panel.n_stations())
        .into_par_iter()
        .map(|s| {
            let id = &panel.stations()[s].id;
            let y = panel.station_series(s, split.estimation());
            let x = panel.station_design(s, split.estimation());
            match kind {
                ModelKind::Lm => fit_lm(id, &y, &x, names).map(|f| (f, None)),
                ModelKind::RegAr1 => fit_reg_ar1(id, &y, &x, names).map(|f| (f, None)),
                ModelKind::RegArma => match select_order_aicc(id, &y, &x, names) {
                    Ok(sel) => Ok((sel.fit, None)),
                    Err(Error::Numerical(msg)) => {
                        let warn = format!("station `{id}`: {msg}; falling back to lm");
                        log::warn!("{warn}");
                        fit_lm(id, &y, &x, names).map(|f| (f, Some(warn)))
                    }
                    Err(e) => Err(e),
                },
            }
        })
        .collect();
    let mut fits = Vec::with_capacity(results.len());
    let mut warnings = Vec::new();
    for r in results {
        let (f, w) = r?;
        fits.push(f);
        warnings.extend(w);
    }
    Ok((fits, warnings))
}

/// `N × τ` normal values over `split.full()`: in-sample on the estimation
/// window, forecasts on the event window.
pub fn baseline_normal_values(panel: &Panel, split: &WindowSplit, fits: &[BaselineFit]) -> Result<DMatrix<f64>> {
    if fits.len() != panel.n_stations() {
        return Err(Error::Data("one baseline fit per station required".into()));
    }
    let mut out = DMatrix::zeros(panel.n_stations(), split.tau());
    for (s, fit) in fits.iter().enumerate() {
        if fit.station_id != panel.stations()[s].id {
            return Err(Error::Data(format!(
                "baseline fit for `{}` does not match station `{}`",
                fit.station_id,
                panel.stations()[s].id
            )));
        }
        let y = panel.station_series(s, split.estimation());
        let x0 = panel.station_design(s, split.estimation());
        let x1 = panel.station_design(s, split.event());
        let ins = in_sample_normal(fit, &y, &x0)?;
        let fc = forecast_baseline(fit, &x1)?;
        for (t, v) in ins.into_iter().chain(fc).enumerate() {
            out[(s, t)] = v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn exact_linear_fit() {
        let x = DMatrix::from_fn(20, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let y: Vec<f64> = (0..20).map(|i| 2.0 * i as f64 + 3.0).collect();
        let f = fit_lm("a", &y, &x, &names(2)).unwrap();
        assert!((f.coefficients[0] - 3.0).abs() < 1e-10);
        assert!((f.coefficients[1] - 2.0).abs() < 1e-10);
        assert!(f.residual_variance < 1e-20);
    }

    #[test]
    fn intercept_only_is_mean() {
        let x = DMatrix::from_element(6, 1, 1.0);
        let y = [1.0, 4.0, f64::NAN, 2.0, 8.0, 5.0];
        let f = fit_lm("a", &y, &x, &names(1)).unwrap();
        assert!((f.coefficients[0] - 4.0).abs() < 1e-12);
        assert_eq!(f.n_obs, 5);
    }

    #[test]
    fn collinear_design_rejected() {
        let x = DMatrix::from_fn(10, 3, |i, j| match j {
            0 => 1.0,
            1 => i as f64,
            _ => 2.0 * i as f64 + 1.0,
        });
        let y: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        match fit_lm("a", &y, &x, &names(3)) {
            Err(Error::RankDeficient(c)) => assert_eq!(c, vec!["x2".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    fn fit_with(ar: Vec<f64>, ma: Vec<f64>, terminal: Vec<f64>) -> BaselineFit {
        BaselineFit {
            station_id: "a".into(),
            kind: ModelKind::RegArma,
            order: ArmaOrder::new(ar.len(), ma.len()).unwrap(),
            coefficients: vec![0.0],
            coefficient_se: vec![0.0],
            ar,
            ma,
            arma_se: None,
            sigma2: 1.0,
            residual_variance: 1.0,
            loglik: 0.0,
            aicc: 0.0,
            n_obs: 10,
            terminal_state: terminal,
            converged: true,
        }
    }

    #[test]
    fn ar1_forecast_halves() {
        // last residual 4, φ = 0.5 → a_{n+1} = 2
        let f = fit_with(vec![0.5], vec![], vec![2.0]);
        let fc = forecast_baseline(&f, &DMatrix::from_element(4, 1, 1.0)).unwrap();
        assert_eq!(fc, vec![2.0, 1.0, 0.5, 0.25]);
    }

    #[test]
    fn ma1_memory_is_one_step() {
        let f = fit_with(vec![], vec![0.6], vec![1.3, 0.4]);
        let fc = forecast_baseline(&f, &DMatrix::from_element(4, 1, 1.0)).unwrap();
        assert_eq!(fc[0], 1.3);
        assert_eq!(&fc[1..], &[0.4, 0.0, 0.0]);
    }

    #[test]
    fn ar1_terminal_state_from_last_residual() {
        let x = DMatrix::from_element(40, 1, 1.0);
        let mut y: Vec<f64> = (0..40).map(|i| ((i * 7) % 5) as f64).collect();
        let f = fit_reg_ar1("a", &y, &x, &names(1)).unwrap();
        let u_last = y[39] - f.coefficients[0];
        assert!((f.terminal_state[0] - f.ar[0] * u_last).abs() < 1e-10);
        y[39] = f64::NAN;
        let g = fit_reg_ar1("a", &y, &x, &names(1)).unwrap();
        let u = y[38] - g.coefficients[0];
        assert!((g.terminal_state[0] - g.ar[0] * g.ar[0] * u).abs() < 1e-10);
    }

    #[test]
    fn order_bounds() {
        assert!(ArmaOrder::new(8, 0).is_err());
        assert_eq!(ArmaOrder::grid().len(), 64);
    }

    #[test]
    fn kind_round_trip() {
        for k in [ModelKind::Lm, ModelKind::RegAr1, ModelKind::RegArma] {
            assert_eq!(k.as_str().parse::<ModelKind>().unwrap(), k);
        }
    }
}
