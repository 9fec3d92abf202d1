//! Geo-referenced panels of station time series.
//!
//! A [`Panel`] holds `N` stations observed on a common, equally spaced
//! timeline of length `τ`. Observations may be missing (`NaN`); covariates
//! must be complete on every time index used for fitting. Lagged covariates
//! make the first `max(lag)` indexes unusable, which is tracked by
//! [`Panel::first_usable`].

mod correlation;
mod ingest;
mod window;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use correlation::{distance_matrix, mean_pairwise_correlation, CorrelationSummary, DistanceMatrix};
pub use ingest::{ingest_csv, project_equirectangular};
pub use window::{split_windows, split_windows_until, WindowSplit};

/// A monitoring station with planar coordinates in km.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: String,
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub static_covariates: BTreeMap<String, f64>,
}

impl Station {
    pub fn new(id: impl Into<String>, x: f64, y: f64) -> Self {
        Station {
            id: id.into(),
            x,
            y,
            static_covariates: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    stations: Vec<Station>,
    timeline: Vec<NaiveDate>,
    observations: DMatrix<f64>,
    covariates: Vec<DMatrix<f64>>,
    covariate_names: Vec<String>,
    first_usable: usize,
}

impl Panel {
    /// Builds a panel and validates its invariants.
    ///
    /// `observations` is `N × τ` with `NaN` marking missing cells;
    /// `covariates[k]` is the `N × τ` matrix of covariate `k`.
    pub fn new(
        stations: Vec<Station>,
        timeline: Vec<NaiveDate>,
        observations: DMatrix<f64>,
        covariates: Vec<DMatrix<f64>>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let panel = Panel {
            stations,
            timeline,
            observations,
            covariates,
            covariate_names,
            first_usable: 0,
        };
        panel.validate()?;
        Ok(panel)
    }

    fn validate(&self) -> Result<()> {
        let n = self.stations.len();
        let tau = self.timeline.len();
        if n == 0 {
            return Err(Error::Data("panel has no stations".into()));
        }
        if tau < 3 {
            return Err(Error::Timeline(format!("timeline has {tau} points, need at least 3")));
        }
        let step = self.timeline[1] - self.timeline[0];
        if step.num_days() <= 0 {
            return Err(Error::Timeline("timeline is not strictly increasing".into()));
        }
        for w in self.timeline.windows(2) {
            if w[1] - w[0] != step {
                return Err(Error::Timeline(format!(
                    "non-constant time step between {} and {}",
                    w[0], w[1]
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for s in &self.stations {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::Data(format!("duplicate station id `{}`", s.id)));
            }
            if !s.x.is_finite() || !s.y.is_finite() {
                return Err(Error::Data(format!("station `{}` has non-finite coordinates", s.id)));
            }
        }
        if self.observations.shape() != (n, tau) {
            return Err(Error::Data(format!(
                "observation matrix is {:?}, expected ({n}, {tau})",
                self.observations.shape()
            )));
        }
        if self.covariates.len() != self.covariate_names.len() {
            return Err(Error::Data("covariate names and matrices differ in count".into()));
        }
        for (s, st) in self.stations.iter().enumerate() {
            if self.observations.row(s).iter().all(|v| v.is_nan()) {
                return Err(Error::Data(format!("station `{}` has no observations", st.id)));
            }
        }
        for (k, cov) in self.covariates.iter().enumerate() {
            if cov.shape() != (n, tau) {
                return Err(Error::Data(format!(
                    "covariate `{}` is {:?}, expected ({n}, {tau})",
                    self.covariate_names[k],
                    cov.shape()
                )));
            }
            for s in 0..n {
                for t in self.first_usable..tau {
                    if !cov[(s, t)].is_finite() {
                        return Err(Error::Data(format!(
                            "covariate `{}` missing for station `{}` at {}",
                            self.covariate_names[k], self.stations[s].id, self.timeline[t]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n_stations(&self) -> usize {
        self.stations.len()
    }

    pub fn n_times(&self) -> usize {
        self.timeline.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariates.len()
    }

    pub fn stations(&self) -> &[Station] {
        &self.stations
    }

    pub fn station_ids(&self) -> Vec<String> {
        self.stations.iter().map(|s| s.id.clone()).collect()
    }

    pub fn timeline(&self) -> &[NaiveDate] {
        &self.timeline
    }

    pub fn observations(&self) -> &DMatrix<f64> {
        &self.observations
    }

    /// Observation at `(s, t)`, `None` when missing.
    pub fn obs(&self, s: usize, t: usize) -> Option<f64> {
        let v = self.observations[(s, t)];
        (!v.is_nan()).then_some(v)
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn covariate(&self, k: usize) -> &DMatrix<f64> {
        &self.covariates[k]
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|n| n == name)
    }

    /// First time index with complete (lag-valid) covariates.
    pub fn first_usable(&self) -> usize {
        self.first_usable
    }

    /// Covariate vector `x_st` written into `out` (length `p`).
    pub fn design_row_into(&self, s: usize, t: usize, out: &mut [f64]) {
        for (k, cov) in self.covariates.iter().enumerate() {
            out[k] = cov[(s, t)];
        }
    }

    pub fn design_row(&self, s: usize, t: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.covariates.len()];
        self.design_row_into(s, t, &mut out);
        out
    }

    /// Design matrix of station `s` over the time range, `len × p`.
    pub fn station_design(&self, s: usize, range: std::ops::Range<usize>) -> DMatrix<f64> {
        let len = range.len();
        DMatrix::from_fn(len, self.covariates.len(), |i, k| self.covariates[k][(s, range.start + i)])
    }

    /// Observations of station `s` over the time range (`NaN` = missing).
    pub fn station_series(&self, s: usize, range: std::ops::Range<usize>) -> Vec<f64> {
        range.map(|t| self.observations[(s, t)]).collect()
    }

    /// Returns a copy with a constant covariate named `intercept` prepended.
    pub fn with_intercept(&self) -> Self {
        let mut out = self.clone();
        out.covariates
            .insert(0, DMatrix::from_element(self.n_stations(), self.n_times(), 1.0));
        out.covariate_names.insert(0, "intercept".to_string());
        out
    }

    /// Broadcasts the named station-level static covariates into
    /// time-constant covariate columns.
    pub fn with_static_covariates(&self, names: &[String]) -> Result<Self> {
        let mut out = self.clone();
        for name in names {
            let mut m = DMatrix::zeros(self.n_stations(), self.n_times());
            for (s, st) in self.stations.iter().enumerate() {
                let v = st.static_covariates.get(name).copied().ok_or_else(|| {
                    Error::Data(format!("station `{}` lacks static covariate `{name}`", st.id))
                })?;
                m.row_mut(s).fill(v);
            }
            out.covariates.push(m);
            out.covariate_names.push(name.clone());
        }
        Ok(out)
    }

    /// Returns a copy with the observation matrix replaced.
    pub fn with_observations(&self, observations: DMatrix<f64>) -> Result<Self> {
        let mut out = self.clone();
        out.observations = observations;
        out.validate()?;
        Ok(out)
    }

    /// Appends lagged copies of existing covariates as `<base>_lag<k>`.
    ///
    /// The first `max(lags)` time indexes become unusable for fitting.
    pub fn add_lagged_covariates(&self, base_names: &[String], lags: &[usize]) -> Result<Self> {
        let tau = self.n_times();
        let mut out = self.clone();
        let mut max_lag = 0;
        for &lag in lags {
            if lag == 0 {
                return Err(Error::Parameter("lags must be at least 1".into()));
            }
            if lag >= tau {
                return Err(Error::Parameter(format!(
                    "lag {lag} is not shorter than the timeline ({tau})"
                )));
            }
            max_lag = max_lag.max(lag);
        }
        for base in base_names {
            let k = self
                .covariate_index(base)
                .ok_or_else(|| Error::Parameter(format!("unknown covariate `{base}`")))?;
            let src = &self.covariates[k];
            for &lag in lags {
                let m = DMatrix::from_fn(self.n_stations(), tau, |s, t| {
                    if t >= lag {
                        src[(s, t - lag)]
                    } else {
                        f64::NAN
                    }
                });
                out.covariates.push(m);
                out.covariate_names.push(format!("{base}_lag{lag}"));
            }
        }
        out.first_usable = self.first_usable.max(max_lag);
        out.validate()?;
        Ok(out)
    }

    /// Sub-panel restricted to the time range. The first-usable marker is
    /// shifted accordingly.
    pub fn restrict_time(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.end > self.n_times() || range.start >= range.end {
            return Err(Error::Window(format!("invalid time range {range:?}")));
        }
        let cols: Vec<usize> = range.clone().collect();
        let pick = |m: &DMatrix<f64>| m.select_columns(cols.iter());
        let out = Panel {
            stations: self.stations.clone(),
            timeline: self.timeline[range.clone()].to_vec(),
            observations: pick(&self.observations),
            covariates: self.covariates.iter().map(pick).collect(),
            covariate_names: self.covariate_names.clone(),
            first_usable: self.first_usable.saturating_sub(range.start),
        };
        out.validate()?;
        Ok(out)
    }

    /// Fraction of missing observation cells per station.
    pub fn missing_rates(&self) -> Vec<f64> {
        let tau = self.n_times() as f64;
        (0..self.n_stations())
            .map(|s| self.observations.row(s).iter().filter(|v| v.is_nan()).count() as f64 / tau)
            .collect()
    }
}
