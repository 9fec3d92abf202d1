//! Descriptive statistics of estimation-window abnormal values: moments,
//! autocorrelations, Hampel outlier shares and cross-sectional correlation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eventstudy::AbnormalPanel;
use crate::panel::mean_pairwise_correlation;
use crate::stats::{kurtosis, mean, median, present, sample_sd, skewness};

/// Lags reported in a [`DiagnosticsRow`].
pub const ROW_LAGS: [usize; 5] = [1, 3, 7, 14, 21];

/// Sample autocorrelations at `lags`.
///
/// Uses the overall mean and variance of the non-missing points and sums
/// lagged products over pairs where both ends are present.
pub fn acf_at(series: &[f64], lags: &[usize]) -> Result<Vec<f64>> {
    let max_lag = lags.iter().copied().max().unwrap_or(0);
    if series.len() <= max_lag + 2 {
        return Err(Error::Data(format!(
            "series of length {} too short for lag {max_lag}",
            series.len()
        )));
    }
    let m = mean(series);
    let denom: f64 = present(series).map(|v| (v - m) * (v - m)).sum();
    if !(denom > 0.0) {
        return Err(Error::Data("autocorrelation of a zero-variance series".into()));
    }
    Ok(lags
        .iter()
        .map(|&l| {
            series
                .iter()
                .zip(&series[l..])
                .filter(|(a, b)| !a.is_nan() && !b.is_nan())
                .map(|(a, b)| (a - m) * (b - m))
                .sum::<f64>()
                / denom
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HampelOptions {
    pub half_window: usize,
    pub threshold: f64,
}

impl Default for HampelOptions {
    fn default() -> Self {
        HampelOptions {
            half_window: 10,
            threshold: 3.0,
        }
    }
}

/// Percentage of non-missing points more than `threshold · 1.4826 · MAD`
/// away from the median of their centred window.
///
/// Windows are truncated at the series ends. The comparison is strict, so
/// a window with zero MAD flags exactly the points that differ from its
/// median and a constant stretch flags nothing.
pub fn hampel_outlier_pct(series: &[f64], half_window: usize, threshold: f64) -> Result<f64> {
    if series.len() <= 2 * half_window + 1 {
        return Err(Error::Data(format!(
            "series of length {} too short for a Hampel half-window of {half_window}",
            series.len()
        )));
    }
    let (mut flagged, mut valid) = (0usize, 0usize);
    for (t, &x) in series.iter().enumerate() {
        if x.is_nan() {
            continue;
        }
        valid += 1;
        let lo = t.saturating_sub(half_window);
        let hi = (t + half_window + 1).min(series.len());
        let window = &series[lo..hi];
        let med = median(window);
        let dev: Vec<f64> = present(window).map(|v| (v - med).abs()).collect();
        let mad = median(&dev);
        if (x - med).abs() > threshold * 1.4826 * mad {
            flagged += 1;
        }
    }
    if valid == 0 {
        return Err(Error::Data("series has no observed values".into()));
    }
    Ok(100.0 * flagged as f64 / valid as f64)
}

/// Cross-station averages of per-station statistics over the estimation
/// window, plus the average pairwise correlation `rho_bar`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub rho_bar: f64,
    pub mu: f64,
    pub sigma: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub phi_1: f64,
    pub phi_3: f64,
    pub phi_7: f64,
    pub phi_14: f64,
    pub phi_21: f64,
    pub outlier_pct: f64,
}

impl DiagnosticsRow {
    pub const LABELS: [&'static str; 11] = [
        "rho", "mu", "sigma", "skewness", "kurtosis", "phi_1", "phi_3", "phi_7", "phi_14", "phi_21", "outliers_pct",
    ];

    pub fn values(&self) -> [f64; 11] {
        [
            self.rho_bar,
            self.mu,
            self.sigma,
            self.skewness,
            self.kurtosis,
            self.phi_1,
            self.phi_3,
            self.phi_7,
            self.phi_14,
            self.phi_21,
            self.outlier_pct,
        ]
    }
}

/// Diagnostics of an `N × τ₀` matrix of estimation-window abnormal values.
pub fn diagnostics_of(est: &DMatrix<f64>, hampel: &HampelOptions) -> Result<DiagnosticsRow> {
    let n = est.nrows();
    if n == 0 {
        return Err(Error::Data("no stations".into()));
    }
    let mut acc = [0.0; 10];
    for s in 0..n {
        let x: Vec<f64> = est.row(s).iter().copied().collect();
        let phi = acf_at(&x, &ROW_LAGS)?;
        let per = [
            mean(&x),
            sample_sd(&x),
            skewness(&x),
            kurtosis(&x),
            phi[0],
            phi[1],
            phi[2],
            phi[3],
            phi[4],
            hampel_outlier_pct(&x, hampel.half_window, hampel.threshold)?,
        ];
        for (a, v) in acc.iter_mut().zip(per) {
            *a += v;
        }
    }
    let acc = acc.map(|a| a / n as f64);
    let rho_bar = if n < 2 { 0.0 } else { mean_pairwise_correlation(est)?.mean };
    Ok(DiagnosticsRow {
        rho_bar,
        mu: acc[0],
        sigma: acc[1],
        skewness: acc[2],
        kurtosis: acc[3],
        phi_1: acc[4],
        phi_3: acc[5],
        phi_7: acc[6],
        phi_14: acc[7],
        phi_21: acc[8],
        outlier_pct: acc[9],
    })
}

pub fn diagnostics_row(abn: &AbnormalPanel, hampel: &HampelOptions) -> Result<DiagnosticsRow> {
    diagnostics_of(&abn.estimation_ac(), hampel)
}

/// One [`DiagnosticsRow`] per model, in input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsTable {
    pub columns: Vec<(String, DiagnosticsRow)>,
}

pub fn diagnostics_table(models: &[(String, &AbnormalPanel)], hampel: &HampelOptions) -> Result<DiagnosticsTable> {
    if models.is_empty() {
        return Err(Error::Config("diagnostics need at least one model".into()));
    }
    let columns = models
        .iter()
        .map(|(name, abn)| Ok((name.clone(), diagnostics_row(abn, hampel)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(DiagnosticsTable { columns })
}

impl DiagnosticsTable {
    pub fn column(&self, model: &str) -> Option<&DiagnosticsRow> {
        self.columns.iter().find(|(m, _)| m == model).map(|(_, r)| r)
    }

    /// Statistics as rows, models as columns.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["statistic".to_string()];
        header.extend(self.columns.iter().map(|(m, _)| m.clone()));
        w.write_record(&header)?;
        let values: Vec<[f64; 11]> = self.columns.iter().map(|(_, r)| r.values()).collect();
        for (i, label) in DiagnosticsRow::LABELS.iter().enumerate() {
            let mut rec = vec![label.to_string()];
            rec.extend(values.iter().map(|v| v[i].to_string()));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("{:<13}", "");
        for (m, _) in &self.columns {
            out += &format!("{m:>12}");
        }
        out.push('\n');
        let values: Vec<[f64; 11]> = self.columns.iter().map(|(_, r)| r.values()).collect();
        for (i, label) in DiagnosticsRow::LABELS.iter().enumerate() {
            out += &format!("{label:<13}");
            for v in &values {
                out += &format!("{:>12.3}", v[i]);
            }
            out.push('\n');
        }
        out
    }
}
