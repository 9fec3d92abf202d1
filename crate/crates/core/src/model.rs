//! The four normal-value models behind one interface.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::baselines::{baseline_normal_values, fit_panel_baselines, BaselineFit, ModelKind};
use crate::error::{Error, Result};
use crate::hdgm::{em_fit, forecast_from_state, initial_params, kalman_smooth, EmOptions, FitSummary, Smoothness};
use crate::panel::{Panel, WindowSplit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NcModel {
    #[serde(rename = "HDGM")]
    Hdgm,
    #[serde(rename = "regARMA")]
    RegArma,
    #[serde(rename = "regAR1")]
    RegAr1,
    #[serde(rename = "lm")]
    Lm,
}

impl NcModel {
    pub const ALL: [NcModel; 4] = [NcModel::Hdgm, NcModel::RegArma, NcModel::RegAr1, NcModel::Lm];

    pub fn as_str(&self) -> &'static str {
        match self {
            NcModel::Hdgm => "HDGM",
            NcModel::RegArma => "regARMA",
            NcModel::RegAr1 => "regAR1",
            NcModel::Lm => "lm",
        }
    }

    fn baseline_kind(&self) -> Option<ModelKind> {
        match self {
            NcModel::Hdgm => None,
            NcModel::RegArma => Some(ModelKind::RegArma),
            NcModel::RegAr1 => Some(ModelKind::RegAr1),
            NcModel::Lm => Some(ModelKind::Lm),
        }
    }

    /// Parses a model list entry; `all` expands to every model.
    pub fn parse_list(s: &str) -> Result<Vec<NcModel>> {
        if s.eq_ignore_ascii_case("all") {
            Ok(Self::ALL.to_vec())
        } else {
            Ok(vec![s.parse()?])
        }
    }
}

impl fmt::Display for NcModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NcModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hdgm" => Ok(NcModel::Hdgm),
            "regarma" => Ok(NcModel::RegArma),
            "regar1" => Ok(NcModel::RegAr1),
            "lm" => Ok(NcModel::Lm),
            _ => Err(Error::Config(format!("unknown model `{s}` (hdgm, regarma, regar1, lm, all)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelOptions {
    pub smoothness: Smoothness,
    pub em: EmOptions,
}

/// A fitted model, enough to rebuild its normal values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub model: NcModel,
    pub hdgm: Option<FitSummary>,
    pub baselines: Vec<BaselineFit>,
    pub warnings: Vec<String>,
}

impl ModelFit {
    /// Whether the fit reached its convergence criterion.
    pub fn converged(&self) -> bool {
        match &self.hdgm {
            Some(s) => s.converged,
            None => self.baselines.iter().all(|b| b.converged),
        }
    }
}

/// Fits `model` on the estimation window.
pub fn fit_model(panel: &Panel, split: &WindowSplit, model: NcModel, opts: &ModelOptions) -> Result<ModelFit> {
    match model.baseline_kind() {
        None => {
            let init = initial_params(panel, split, opts.smoothness)?;
            let fit = em_fit(panel, split, &init, &opts.em)?;
            Ok(ModelFit {
                model,
                hdgm: Some(fit.summary()),
                baselines: Vec::new(),
                warnings: fit.warnings,
            })
        }
        Some(kind) => {
            let (fits, warnings) = fit_panel_baselines(panel, split, kind)?;
            Ok(ModelFit {
                model,
                hdgm: None,
                baselines: fits,
                warnings,
            })
        }
    }
}

/// `N × τ` normal values over `split.full()`.
///
/// For HDGM the estimation window gets `x'β` plus the smoothed latent
/// state and the event window the forecast from the filtered state at the
/// last estimation point; baselines use their in-sample one-step
/// predictions and forecasts.
pub fn normal_values(panel: &Panel, split: &WindowSplit, fit: &ModelFit) -> Result<DMatrix<f64>> {
    match &fit.hdgm {
        Some(summary) => {
            let p = &summary.params;
            let sm = kalman_smooth(panel, split, p)?;
            let fc = forecast_from_state(panel, split.event(), p, &sm.last_filtered)?;
            let mut nc = DMatrix::zeros(panel.n_stations(), split.tau());
            for s in 0..panel.n_stations() {
                for (j, t) in split.estimation().enumerate() {
                    let x = panel.design_row(s, t);
                    let reg: f64 = x.iter().zip(&p.beta).map(|(a, b)| a * b).sum();
                    nc[(s, j)] = reg + sm.means[(s, j)];
                }
                for h in 0..split.tau1() {
                    nc[(s, split.tau0() + h)] = fc[(s, h)];
                }
            }
            Ok(nc)
        }
        None => baseline_normal_values(panel, split, &fit.baselines),
    }
}
