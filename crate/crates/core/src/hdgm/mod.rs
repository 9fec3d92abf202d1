//! Hidden Dynamics Geostatistical Model.
//!
//! ```text
//! y_st = x_st'β + w_st + ε_st,        ε_st ~ N(0, σ²_ε) iid
//! w_t  = g·w_{t-1} + ω_t,              ω_t ~ N(0, ν·M(θ))
//! ```
//!
//! `M(θ)` is the Matérn correlation matrix of the station distances. The
//! latent field starts from its stationary law `N(0, ν/(1-g²)·M(θ))`.
//! Likelihood, smoothing and forecasting run through an `N`-dimensional
//! Kalman filter; parameters are estimated by EM.

mod em;
mod kalman;
mod matern;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use em::{em_fit, initial_params, EmOptions, FitResult, FitSummary};
pub use kalman::{
    forecast_from_state, forecast_normal, kalman_filter, kalman_loglik, kalman_smooth, FitWindow,
    Filtered, Smoothed, StateSpaceRep,
};
pub use matern::{matern_correlation, matern_matrix, Smoothness};

/// HDGM parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HdgmParams {
    pub beta: Vec<f64>,
    /// Temporal AR coefficient, `|g| < 1`.
    pub g: f64,
    /// Random-effect variance.
    pub nu: f64,
    /// Spatial range in km.
    pub theta: f64,
    pub sigma2_eps: f64,
    #[serde(default)]
    pub smoothness: Smoothness,
}

impl HdgmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.g.abs() < 1.0) {
            return Err(Error::Parameter(format!("|g| must be < 1, got {}", self.g)));
        }
        for (name, v) in [("nu", self.nu), ("theta", self.theta), ("sigma2_eps", self.sigma2_eps)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Parameter("beta contains non-finite values".into()));
        }
        Ok(())
    }

    /// Variance of the stationary latent field, `ν / (1 - g²)`.
    pub fn stationary_variance(&self) -> f64 {
        self.nu / (1.0 - self.g * self.g)
    }

    /// Marginal standard deviation of `y` given the covariates.
    pub fn marginal_sd(&self) -> f64 {
        (self.stationary_variance() + self.sigma2_eps).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariants_checked() {
        let ok = HdgmParams {
            beta: vec![1.0],
            g: 0.5,
            nu: 1.0,
            theta: 10.0,
            sigma2_eps: 1.0,
            smoothness: Smoothness::Half,
        };
        assert!(ok.validate().is_ok());
        assert!(HdgmParams { g: 1.0, ..ok.clone() }.validate().is_err());
        assert!(HdgmParams { nu: 0.0, ..ok.clone() }.validate().is_err());
        assert!(HdgmParams { theta: -1.0, ..ok.clone() }.validate().is_err());
        assert!(HdgmParams { sigma2_eps: f64::NAN, ..ok }.validate().is_err());
    }

    #[test]
    fn json_shape() {
        let p = HdgmParams {
            beta: vec![1.0, 2.0],
            g: 0.5,
            nu: 1.0,
            theta: 10.0,
            sigma2_eps: 1.0,
            smoothness: Smoothness::ThreeHalves,
        };
        let v: serde_json::Value = serde_json::to_value(&p).unwrap();
        assert_eq!(v["smoothness"], 1.5);
        let back: HdgmParams = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
    }
}
