//! Small numeric helpers shared by the modules.
//!
//! Missing values are `NaN` throughout the crate; helpers here skip them
//! where noted.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use statrs::statistics::{Data, OrderStatistics, RankTieBreaker};

pub(crate) fn present(values: &[f64]) -> impl Iterator<Item = f64> + '_ {
    values.iter().copied().filter(|v| !v.is_nan())
}

/// Mean of the non-missing values, `NaN` when none are present.
pub fn mean(values: &[f64]) -> f64 {
    let (sum, n) = present(values).fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Sample standard deviation (denominator n - 1) of the non-missing values.
pub fn sample_sd(values: &[f64]) -> f64 {
    let m = mean(values);
    let (ss, n) = present(values).fold((0.0, 0usize), |(s, n), v| (s + (v - m).powi(2), n + 1));
    if n < 2 {
        f64::NAN
    } else {
        (ss / (n - 1) as f64).sqrt()
    }
}

/// Central moments m2, m3, m4 (denominator n) of the non-missing values.
pub fn central_moments(values: &[f64]) -> (f64, f64, f64) {
    let m = mean(values);
    let mut n = 0usize;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in present(values) {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
        n += 1;
    }
    let n = n as f64;
    (m2 / n, m3 / n, m4 / n)
}

/// Moment skewness m3 / m2^1.5.
pub fn skewness(values: &[f64]) -> f64 {
    let (m2, m3, _) = central_moments(values);
    m3 / m2.powf(1.5)
}

/// Moment kurtosis m4 / m2^2 (not excess-adjusted; normal data gives about 3).
pub fn kurtosis(values: &[f64]) -> f64 {
    let (m2, _, m4) = central_moments(values);
    m4 / (m2 * m2)
}

/// Pearson correlation on the pairwise-complete overlap of two series.
///
/// Returns `(r, overlap)`; `r` is `None` when either series has zero
/// variance on the overlap or the overlap is shorter than 2.
pub fn pearson_pairwise(a: &[f64], b: &[f64]) -> (Option<f64>, usize) {
    let pairs: Vec<(f64, f64)> = a
        .iter()
        .zip(b)
        .filter(|(x, y)| !x.is_nan() && !y.is_nan())
        .map(|(x, y)| (*x, *y))
        .collect();
    let n = pairs.len();
    if n < 2 {
        return (None, n);
    }
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in &pairs {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return (None, n);
    }
    (Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)), n)
}

/// Linear-interpolation quantile (R type 7) of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median of the non-missing values.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = present(values).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Mid-ranks (1-based, ties averaged) of a complete series.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    Data::new(values.to_vec()).ranks(RankTieBreaker::Average)
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

pub fn student_t_cdf(x: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .map(|d| d.cdf(x))
        .unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn moments_skip_missing() {
        let x = [1.0, f64::NAN, 2.0, 3.0];
        assert_eq!(mean(&x), 2.0);
        assert_abs_diff_eq!(sample_sd(&x), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(skewness(&x), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn type7_quantiles() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_abs_diff_eq!(quantile_sorted(&s, 0.25), 1.75);
        assert_abs_diff_eq!(quantile_sorted(&s, 0.5), 2.5);
    }

    #[test]
    fn pearson_zero_variance_is_none() {
        let (r, n) = pearson_pairwise(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]);
        assert!(r.is_none());
        assert_eq!(n, 3);
    }
}
