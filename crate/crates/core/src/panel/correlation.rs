use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::Panel;
use crate::error::{Error, Result};
use crate::stats::{pearson_pairwise, quantile_sorted};

/// Pairwise Euclidean distances between stations, in km.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix(DMatrix<f64>);

impl DistanceMatrix {
    pub fn from_coordinates(coords: &[(f64, f64)]) -> Self {
        let n = coords.len();
        DistanceMatrix(DMatrix::from_fn(n, n, |i, j| {
            let (dx, dy) = (coords[i].0 - coords[j].0, coords[i].1 - coords[j].1);
            dx.hypot(dy)
        }))
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    fn off_diagonal(&self) -> Vec<f64> {
        let n = self.len();
        let mut v = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                v.push(self.0[(i, j)]);
            }
        }
        v
    }

    /// Median over distinct pairs; `None` for a single station.
    pub fn median_pairwise(&self) -> Option<f64> {
        let mut v = self.off_diagonal();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        Some(quantile_sorted(&v, 0.5))
    }
}

pub fn distance_matrix(panel: &Panel) -> DistanceMatrix {
    let coords: Vec<(f64, f64)> = panel.stations().iter().map(|s| (s.x, s.y)).collect();
    DistanceMatrix::from_coordinates(&coords)
}

/// Summary of the pairwise Pearson correlations between panel rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub mean: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
    /// Pairs entering the summary.
    pub pairs: usize,
    /// Pairs dropped for fewer than 3 overlapping points.
    pub short_overlap: usize,
    /// Pairs dropped for zero variance on their overlap.
    pub zero_variance: usize,
}

/// Average pairwise-complete Pearson correlation between the rows of an
/// `N × T` matrix (`NaN` = missing), with a five-number summary.
pub fn mean_pairwise_correlation(matrix: &DMatrix<f64>) -> Result<CorrelationSummary> {
    let n = matrix.nrows();
    if n < 2 {
        return Err(Error::Data("pairwise correlation needs at least 2 series".into()));
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|i| matrix.row(i).iter().copied().collect()).collect();
    let mut r = Vec::with_capacity(n * (n - 1) / 2);
    let (mut short, mut flat) = (0, 0);
    for i in 0..n {
        for j in i + 1..n {
            match pearson_pairwise(&rows[i], &rows[j]) {
                (_, overlap) if overlap < 3 => short += 1,
                (Some(v), _) => r.push(v),
                (None, _) => flat += 1,
            }
        }
    }
    if short + flat > 0 {
        log::warn!(
            "pairwise correlation: {short} pair(s) with fewer than 3 overlapping points and \
             {flat} pair(s) with zero variance excluded"
        );
    }
    if r.is_empty() {
        return Err(Error::Data("every station pair was excluded from the correlation".into()));
    }
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    r.sort_by(f64::total_cmp);
    Ok(CorrelationSummary {
        mean,
        min: r[0],
        q25: quantile_sorted(&r, 0.25),
        median: quantile_sorted(&r, 0.5),
        q75: quantile_sorted(&r, 0.75),
        max: r[r.len() - 1],
        pairs: r.len(),
        short_overlap: short,
        zero_variance: flat,
    })
}
