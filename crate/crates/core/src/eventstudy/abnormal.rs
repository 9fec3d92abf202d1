use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{mean_pairwise_correlation, Panel, WindowSplit};

/// Settings for turning normal values into abnormal values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AbnormalOptions {
    /// `d` in the `n - d` denominator of the per-station standard deviation.
    pub sigma_dof: usize,
    /// Stations with fewer non-missing estimation-window ACs are dropped.
    pub min_estimation_points: usize,
}

impl Default for AbnormalOptions {
    fn default() -> Self {
        AbnormalOptions {
            sigma_dof: 0,
            min_estimation_points: 30,
        }
    }
}

/// Abnormal values `AC = C - NC` of the included stations over the
/// estimation and event windows.
///
/// Column `j` of [`ac`](Self::ac) is timeline index `split.start + j`, so
/// the first `τ₀` columns are the estimation window.
#[derive(Debug, Clone, PartialEq)]
pub struct AbnormalPanel {
    station_ids: Vec<String>,
    ac: DMatrix<f64>,
    cac: Vec<f64>,
    split: WindowSplit,
    sigma_hat: Vec<f64>,
    r_bar: f64,
    dates: Option<Vec<NaiveDate>>,
    excluded: Vec<String>,
    warnings: Vec<String>,
}

/// Observed minus normal values with the default [`AbnormalOptions`].
///
/// `nc` is `N × τ` and aligned with `split.full()`.
pub fn compute_abnormal(panel: &Panel, nc: &DMatrix<f64>, split: &WindowSplit) -> Result<AbnormalPanel> {
    compute_abnormal_with(panel, nc, split, &AbnormalOptions::default())
}

pub fn compute_abnormal_with(
    panel: &Panel,
    nc: &DMatrix<f64>,
    split: &WindowSplit,
    opts: &AbnormalOptions,
) -> Result<AbnormalPanel> {
    let n = panel.n_stations();
    if split.end > panel.n_times() {
        return Err(Error::Window(format!(
            "window ends at {} but the panel has {} time points",
            split.end,
            panel.n_times()
        )));
    }
    if nc.shape() != (n, split.tau()) {
        return Err(Error::Data(format!(
            "normal values are {}x{}, expected {n}x{}",
            nc.nrows(),
            nc.ncols(),
            split.tau()
        )));
    }
    let y = panel.observations();
    let ac = DMatrix::from_fn(n, split.tau(), |s, j| y[(s, split.start + j)] - nc[(s, j)]);
    let mut out = AbnormalPanel::build(panel.station_ids(), ac, *split, opts)?;
    out.dates = Some(panel.timeline()[split.full()].to_vec());
    Ok(out)
}

impl AbnormalPanel {
    /// Builds an abnormal panel straight from an `N × τ` matrix of ACs whose
    /// first `tau0` columns are the estimation window.
    pub fn from_matrix(
        station_ids: Vec<String>,
        ac: DMatrix<f64>,
        tau0: usize,
        opts: &AbnormalOptions,
    ) -> Result<Self> {
        if station_ids.len() != ac.nrows() {
            return Err(Error::Data(format!(
                "{} station ids for {} rows of abnormal values",
                station_ids.len(),
                ac.nrows()
            )));
        }
        let split = WindowSplit::new(0, tau0, ac.ncols())?;
        Self::build(station_ids, ac, split, opts)
    }

    fn build(ids: Vec<String>, ac: DMatrix<f64>, split: WindowSplit, opts: &AbnormalOptions) -> Result<Self> {
        let tau0 = split.tau0();
        let mut keep = Vec::new();
        let mut excluded = Vec::new();
        let mut warnings = Vec::new();
        let mut sigma_hat = Vec::new();
        for (s, id) in ids.iter().enumerate() {
            let est: Vec<f64> = (0..tau0).map(|j| ac[(s, j)]).filter(|v| !v.is_nan()).collect();
            if est.len() < opts.min_estimation_points.max(2) || est.len() <= opts.sigma_dof {
                warnings.push(format!(
                    "station `{id}` excluded: {} non-missing estimation-window ACs (need {})",
                    est.len(),
                    opts.min_estimation_points
                ));
                excluded.push(id.clone());
                continue;
            }
            let m = est.iter().sum::<f64>() / est.len() as f64;
            let ss: f64 = est.iter().map(|v| (v - m) * (v - m)).sum();
            let sd = (ss / (est.len() - opts.sigma_dof) as f64).sqrt();
            if !(sd > 0.0) || !sd.is_finite() {
                warnings.push(format!("station `{id}` excluded: estimation-window ACs are all tied"));
                excluded.push(id.clone());
                continue;
            }
            keep.push(s);
            sigma_hat.push(sd);
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        if keep.is_empty() {
            return Err(Error::Data("every station was excluded from the event study".into()));
        }
        let ac = ac.select_rows(&keep);
        let station_ids: Vec<String> = keep.iter().map(|&s| ids[s].clone()).collect();
        let cac: Vec<f64> = (0..keep.len())
            .map(|s| split.event().map(|t| ac[(s, t - split.start)]).sum())
            .collect();
        for (id, c) in station_ids.iter().zip(&cac) {
            if c.is_nan() {
                let msg = format!("station `{id}` has missing event-window ACs; left out of parametric statistics");
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
        let r_bar = estimation_r_bar(&ac.columns(0, tau0).into_owned())?;
        Ok(AbnormalPanel {
            station_ids,
            ac,
            cac,
            split,
            sigma_hat,
            r_bar,
            dates: None,
            excluded,
            warnings,
        })
    }

    /// Replaces the cross-sectional correlation estimate.
    pub fn with_r_bar(mut self, r_bar: f64) -> Result<Self> {
        let lo = self.r_bar_lower_bound();
        if !(lo..=1.0).contains(&r_bar) {
            return Err(Error::Parameter(format!("r_bar = {r_bar} outside [{lo}, 1]")));
        }
        self.r_bar = r_bar;
        Ok(self)
    }

    fn r_bar_lower_bound(&self) -> f64 {
        let n = self.n_stations();
        if n < 2 {
            0.0
        } else {
            -1.0 / (n - 1) as f64
        }
    }

    pub fn station_ids(&self) -> &[String] {
        &self.station_ids
    }

    pub fn n_stations(&self) -> usize {
        self.station_ids.len()
    }

    pub fn ac(&self) -> &DMatrix<f64> {
        &self.ac
    }

    /// Cumulative event-window AC per station; `NaN` when any event AC is missing.
    pub fn cac(&self) -> &[f64] {
        &self.cac
    }

    pub fn split(&self) -> &WindowSplit {
        &self.split
    }

    pub fn tau0(&self) -> usize {
        self.split.tau0()
    }

    pub fn tau1(&self) -> usize {
        self.split.tau1()
    }

    pub fn sigma_hat(&self) -> &[f64] {
        &self.sigma_hat
    }

    pub fn r_bar(&self) -> f64 {
        self.r_bar
    }

    /// Dates of the AC columns when built from a panel.
    pub fn dates(&self) -> Option<&[NaiveDate]> {
        self.dates.as_deref()
    }

    pub fn excluded(&self) -> &[String] {
        &self.excluded
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Estimation-window ACs, `N × τ₀`.
    pub fn estimation_ac(&self) -> DMatrix<f64> {
        self.ac.columns(0, self.tau0()).into_owned()
    }

    /// Non-missing estimation-window count per station.
    pub(crate) fn estimation_counts(&self) -> Vec<usize> {
        (0..self.n_stations())
            .map(|s| (0..self.tau0()).filter(|&j| !self.ac[(s, j)].is_nan()).count())
            .collect()
    }

    /// `AC / σ̂` over both windows.
    pub fn standardized(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_stations(), self.split.tau(), |s, j| self.ac[(s, j)] / self.sigma_hat[s])
    }
}

fn estimation_r_bar(est: &DMatrix<f64>) -> Result<f64> {
    let n = est.nrows();
    if n < 2 {
        return Ok(0.0);
    }
    let r = mean_pairwise_correlation(est)?.mean;
    Ok(r.clamp(-1.0 / (n - 1) as f64, 1.0))
}
