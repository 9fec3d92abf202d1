use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::DistanceMatrix;

/// Matérn smoothness. Only the half-integer cases with closed forms are
/// supported; serialized as the number 0.5, 1.5 or 2.5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub enum Smoothness {
    /// Exponential kernel.
    #[default]
    Half,
    ThreeHalves,
    FiveHalves,
}

impl TryFrom<f64> for Smoothness {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        match v {
            x if x == 0.5 => Ok(Smoothness::Half),
            x if x == 1.5 => Ok(Smoothness::ThreeHalves),
            x if x == 2.5 => Ok(Smoothness::FiveHalves),
            _ => Err(Error::Parameter(format!(
                "Matérn smoothness must be 0.5, 1.5 or 2.5, got {v}"
            ))),
        }
    }
}

impl From<Smoothness> for f64 {
    fn from(s: Smoothness) -> f64 {
        match s {
            Smoothness::Half => 0.5,
            Smoothness::ThreeHalves => 1.5,
            Smoothness::FiveHalves => 2.5,
        }
    }
}

/// Matérn correlation at distance `d` for range `theta`.
pub fn matern_correlation(d: f64, theta: f64, smoothness: Smoothness) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::Parameter(format!("Matérn range must be positive, got {theta}")));
    }
    if !(d >= 0.0) {
        return Err(Error::Parameter(format!("distance must be non-negative, got {d}")));
    }
    Ok(matern_unchecked(d / theta, smoothness))
}

fn matern_unchecked(r: f64, smoothness: Smoothness) -> f64 {
    match smoothness {
        Smoothness::Half => (-r).exp(),
        Smoothness::ThreeHalves => {
            let a = 3f64.sqrt() * r;
            (1.0 + a) * (-a).exp()
        }
        Smoothness::FiveHalves => {
            let a = 5f64.sqrt() * r;
            (1.0 + a + a * a / 3.0) * (-a).exp()
        }
    }
}

/// `N × N` Matérn correlation matrix of the station distances.
pub fn matern_matrix(dist: &DistanceMatrix, theta: f64, smoothness: Smoothness) -> Result<DMatrix<f64>> {
    if !(theta > 0.0) {
        return Err(Error::Parameter(format!("Matérn range must be positive, got {theta}")));
    }
    let n = dist.len();
    Ok(DMatrix::from_fn(n, n, |i, j| matern_unchecked(dist.get(i, j) / theta, smoothness)))
}

pub(crate) const JITTER: f64 = 1e-10;

/// Cholesky factor of the Matérn matrix. On failure a diagonal jitter of
/// `1e-10` is added once; a second failure is a numerical error.
pub(crate) fn matern_cholesky(
    dist: &DistanceMatrix,
    theta: f64,
    smoothness: Smoothness,
) -> Result<(DMatrix<f64>, Cholesky<f64, Dyn>)> {
    let mut m = matern_matrix(dist, theta, smoothness)?;
    if let Some(c) = m.clone().cholesky() {
        return Ok((m, c));
    }
    for i in 0..m.nrows() {
        m[(i, i)] += JITTER;
    }
    match m.clone().cholesky() {
        Some(c) => Ok((m, c)),
        None => Err(Error::Numerical(format!(
            "Matérn correlation matrix not positive definite after jitter (theta = {theta})"
        ))),
    }
}
