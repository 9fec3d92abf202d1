//! Test-statistic formulas on plain arrays.
//!
//! The family functions in the parent module feed these from an
//! [`AbnormalPanel`](super::AbnormalPanel); they are public so small
//! configurations can be checked directly.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::panel::mean_pairwise_correlation;
use crate::stats::{mean, midranks, sample_sd};

fn cross_sectional_sd(values: &[f64], what: &str) -> Result<f64> {
    let sd = sample_sd(values);
    if !(sd > 0.0) {
        return Err(Error::Data(format!("zero cross-sectional variance of {what}")));
    }
    Ok(sd)
}

/// `mean(CAC) / (sd(CAC) / √N)`.
pub fn cross_t(cac: &[f64]) -> Result<f64> {
    if cac.iter().all(|&c| c == 0.0) {
        return Ok(0.0);
    }
    let sd = cross_sectional_sd(cac, "CAC")?;
    Ok(mean(cac) / (sd / (cac.len() as f64).sqrt()))
}

/// Bias-adjusted sample skewness `N Σ(x - x̄)³ / ((N-1)(N-2) s³)`.
pub fn sample_skewness(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = mean(x);
    let s = sample_sd(x);
    let m3: f64 = x.iter().map(|v| (v - m).powi(3)).sum();
    n * m3 / ((n - 1.0) * (n - 2.0) * s.powi(3))
}

/// Skewness-corrected t (Hall 1992):
/// `√N (S + γ̂S²/3 + γ̂²S³/27 + γ̂/(6N))` with `S = mean/sd`.
///
/// The cubic term keeps the map increasing in `S`; without it a strong
/// negative shift with positive skewness can come out positive.
pub fn skew_t(cac: &[f64]) -> Result<f64> {
    if cac.iter().all(|&c| c == 0.0) {
        return Ok(0.0);
    }
    let n = cac.len() as f64;
    let s = mean(cac) / cross_sectional_sd(cac, "CAC")?;
    let g = sample_skewness(cac);
    Ok(n.sqrt() * (s + g * s * s / 3.0 + g * g * s.powi(3) / 27.0 + g / (6.0 * n)))
}

/// Crude-dependence t: event-window sum of the cross-station mean AC over
/// `√τ₁` times the estimation-window sd of that mean. Returns the statistic
/// and the number of estimation points behind the sd.
pub fn crude_dependence_t(ac: &DMatrix<f64>, tau0: usize) -> Result<(f64, usize)> {
    let abar: Vec<f64> = (0..ac.ncols())
        .map(|t| mean(&ac.column(t).iter().copied().collect::<Vec<_>>()))
        .collect();
    let (est, event) = abar.split_at(tau0);
    let n_est = est.iter().filter(|v| !v.is_nan()).count();
    let event: Vec<f64> = event.iter().copied().filter(|v| !v.is_nan()).collect();
    if event.is_empty() {
        return Err(Error::Data("no event-window ACs".into()));
    }
    let num: f64 = event.iter().sum();
    if num == 0.0 {
        return Ok((0.0, n_est));
    }
    let sd = sample_sd(est);
    if !(sd > 0.0) {
        return Err(Error::Data("zero estimation-window variance of the mean AC".into()));
    }
    Ok((num / ((event.len() as f64).sqrt() * sd), n_est))
}

/// Variance of a sum of `m` standardized ACs from a station with `n`
/// estimation points: `m (n-2)/(n-4)`.
pub fn standardized_sum_variance(m: usize, n: usize) -> Result<f64> {
    if n <= 4 {
        return Err(Error::Data(format!("need more than 4 estimation points, got {n}")));
    }
    Ok(m as f64 * (n as f64 - 2.0) / (n as f64 - 4.0))
}

/// Patell Z: `Σ CSAR_s / √(Σ_s τ₁ (τ₀ₛ-2)/(τ₀ₛ-4))`.
pub fn patell_z(csar: &[f64], est_counts: &[usize], tau1: usize) -> Result<f64> {
    let mut var = 0.0;
    for &n in est_counts {
        var += standardized_sum_variance(tau1, n)?;
    }
    Ok(csar.iter().sum::<f64>() / var.sqrt())
}

/// `1 + (N-1) r̄`, the variance inflation of a mean of `N` equicorrelated
/// terms.
pub fn dependence_inflation(n: usize, r_bar: f64) -> Result<f64> {
    let f = 1.0 + (n as f64 - 1.0) * r_bar;
    if !(f > 0.0) {
        return Err(Error::Numerical(format!(
            "1 + (N-1) r_bar = {f} is not positive (N = {n}, r_bar = {r_bar})"
        )));
    }
    Ok(f)
}

/// `Z / √(1 + (N-1) r̄)`.
pub fn patell_adjust(z: f64, n: usize, r_bar: f64) -> Result<f64> {
    Ok(z / dependence_inflation(n, r_bar)?.sqrt())
}

/// `√N mean(SCAR) / sd(SCAR)`.
pub fn bmp_z(scar: &[f64]) -> Result<f64> {
    if scar.iter().all(|&c| c == 0.0) {
        return Ok(0.0);
    }
    let sd = cross_sectional_sd(scar, "SCAR")?;
    Ok((scar.len() as f64).sqrt() * mean(scar) / sd)
}

/// `Z √((1 - r̄) / (1 + (N-1) r̄))`.
pub fn bmp_adjust(z: f64, n: usize, r_bar: f64) -> Result<f64> {
    Ok(z * ((1.0 - r_bar) / dependence_inflation(n, r_bar)?).sqrt())
}

/// Per-station scaled mid-ranks `K/(τₛ+1) - 1/2` over the non-missing
/// entries of each row; missing stays `NaN`.
pub fn scaled_ranks(values: &DMatrix<f64>) -> DMatrix<f64> {
    let mut u = DMatrix::from_element(values.nrows(), values.ncols(), f64::NAN);
    for s in 0..values.nrows() {
        let idx: Vec<usize> = (0..values.ncols()).filter(|&t| !values[(s, t)].is_nan()).collect();
        let v: Vec<f64> = idx.iter().map(|&t| values[(s, t)]).collect();
        let denom = v.len() as f64 + 1.0;
        for (&t, k) in idx.iter().zip(midranks(&v)) {
            u[(s, t)] = k / denom - 0.5;
        }
    }
    u
}

/// Cross-station mean and count of present stations per column.
fn column_means(u: &DMatrix<f64>) -> Vec<(f64, usize)> {
    (0..u.ncols())
        .map(|t| {
            let (sum, n) = u
                .column(t)
                .iter()
                .filter(|v| !v.is_nan())
                .fold((0.0, 0usize), |(a, n), v| (a + v, n + 1));
            if n == 0 {
                (f64::NAN, 0)
            } else {
                (sum / n as f64, n)
            }
        })
        .collect()
}

/// The cumulative rank statistics on one AC matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorradoStats {
    pub cumrank: f64,
    pub cumrank_mod: f64,
    pub cumrank_t: f64,
    pub cumrank_t_df: f64,
    pub cumrank_z: f64,
    pub cumrank_z_adj: f64,
}

/// Rank statistics for an `N × τ` AC matrix whose first `tau0` columns are
/// the estimation window.
///
/// With `Ū_t` the mean scaled rank over the `N_t` stations present at `t`
/// and `w_t = √(N_t/N)`, over the `τ` columns with `N_t > 0`:
///
/// * `CumRank = Σ_{Ω₁} Ū_t / (√τ₁ s)`, `s² = Σ Ū_t² / τ` (Corrado 1989,
///   cumulated over the event window);
/// * `CumRank_mod` uses `w_t Ū_t` in both places (Corrado and Zivney 1992);
/// * `CumRank_T` is the pooled two-sample t between the event and
///   estimation means of `w_t Ū_t`, df `τ₀ + τ₁ - 2`;
/// * `CumRank_Z` sums station event ranks against their exact
///   within-station permutation variance, ignoring cross-station dependence;
/// * `CumRank_Z_adj` is `CumRank` with the finite-population factor
///   `√((τ-τ₁)/(τ-1))` on the event sum (Hagnäs and Pynnönen 2014).
pub fn corrado_statistics(ac: &DMatrix<f64>, tau0: usize) -> Result<CorradoStats> {
    let n = ac.nrows() as f64;
    let u = scaled_ranks(ac);
    let cols = column_means(&u);
    let (mut ss, mut ss_w, mut tau, mut tau1) = (0.0, 0.0, 0usize, 0usize);
    let (mut num, mut num_w) = (0.0, 0.0);
    let (mut est_w, mut ev_w) = (Vec::new(), Vec::new());
    for (t, &(ubar, nt)) in cols.iter().enumerate() {
        if nt == 0 {
            continue;
        }
        let w = (nt as f64 / n).sqrt();
        tau += 1;
        ss += ubar * ubar;
        ss_w += w * w * ubar * ubar;
        if t >= tau0 {
            tau1 += 1;
            num += ubar;
            num_w += w * ubar;
            ev_w.push(w * ubar);
        } else {
            est_w.push(w * ubar);
        }
    }
    if tau1 == 0 || est_w.len() < 2 {
        return Err(Error::Data("rank statistics need event and estimation ranks".into()));
    }
    if !(ss > 0.0) {
        return Err(Error::Data("all scaled ranks are tied".into()));
    }
    let s = (ss / tau as f64).sqrt();
    let s_w = (ss_w / tau as f64).sqrt();
    let (taun, tau1n) = (tau as f64, tau1 as f64);
    let cumrank = num / (tau1n.sqrt() * s);
    let cumrank_mod = num_w / (tau1n.sqrt() * s_w);
    let cumrank_z_adj = num / (s * (tau1n * (taun - tau1n) / (taun - 1.0)).sqrt());

    let (n0, n1) = (est_w.len() as f64, ev_w.len() as f64);
    let (m0, m1) = (mean(&est_w), mean(&ev_w));
    let ss0: f64 = est_w.iter().map(|v| (v - m0).powi(2)).sum();
    let ss1: f64 = ev_w.iter().map(|v| (v - m1).powi(2)).sum();
    let df = n0 + n1 - 2.0;
    let sp = ((ss0 + ss1) / df).sqrt();
    let cumrank_t = if m1 == m0 {
        0.0
    } else {
        (m1 - m0) / (sp * (1.0 / n0 + 1.0 / n1).sqrt())
    };

    let (mut zsum, mut zvar) = (0.0, 0.0);
    for st in 0..ac.nrows() {
        let row: Vec<f64> = u.row(st).iter().copied().filter(|v| !v.is_nan()).collect();
        let ts = row.len() as f64;
        let pop_var = row.iter().map(|v| v * v).sum::<f64>() / ts;
        let ev: Vec<f64> = (tau0..ac.ncols()).map(|t| u[(st, t)]).filter(|v| !v.is_nan()).collect();
        let m = ev.len() as f64;
        if m == 0.0 || ts < 2.0 {
            continue;
        }
        zsum += ev.iter().sum::<f64>();
        zvar += m * pop_var * (ts - m) / (ts - 1.0);
    }
    let cumrank_z = if zsum == 0.0 { 0.0 } else { zsum / zvar.sqrt() };

    Ok(CorradoStats {
        cumrank,
        cumrank_mod,
        cumrank_t,
        cumrank_t_df: df,
        cumrank_z,
        cumrank_z_adj,
    })
}

/// Generalized rank statistics (Kolari and Pynnönen 2011).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrankStats {
    pub z: f64,
    pub z_adj: f64,
    pub t: f64,
    pub t_df: f64,
    /// Average pairwise correlation of the estimation-window scaled ranks.
    pub r_bar_u: f64,
}

/// Ranks each station's generalized series (its estimation-window values
/// followed by one event value) and tests the event position.
///
/// * `Z_grank = Σ_s U_Es / √(Σ_s V_s)`, `V_s` the variance of station `s`'s
///   scaled ranks, i.e. independence across stations;
/// * `T_grank = Z √((T-2)/(T-1-Z²))` with `Z = Ū_E / S_Ū`,
///   `S_Ū² = Σ_t (n_t/N) Ū_t² / T` over the `T = τ₀ + 1` positions, df `T - 2`;
/// * `Z_grank_adj = Z_grank / √(1 + (N-1) r̄_U)`.
pub fn grank_statistics(estimation: &DMatrix<f64>, event: &[f64]) -> Result<GrankStats> {
    let (n, tau0) = estimation.shape();
    if event.len() != n {
        return Err(Error::Data("one event value per station is required".into()));
    }
    let g = DMatrix::from_fn(n, tau0 + 1, |s, t| if t < tau0 { estimation[(s, t)] } else { event[s] });
    let u = scaled_ranks(&g);
    let cols = column_means(&u);
    let (ue, ne) = cols[tau0];
    if ne == 0 {
        return Err(Error::Data("no station has an event value".into()));
    }

    let (mut zsum, mut zvar) = (0.0, 0.0);
    for s in 0..n {
        if event[s].is_nan() {
            continue;
        }
        let row: Vec<f64> = u.row(s).iter().copied().filter(|v| !v.is_nan()).collect();
        zsum += u[(s, tau0)];
        zvar += row.iter().map(|v| v * v).sum::<f64>() / row.len() as f64;
    }
    if !(zvar > 0.0) {
        return Err(Error::Data("all generalized ranks are tied".into()));
    }
    let z = if zsum == 0.0 { 0.0 } else { zsum / zvar.sqrt() };

    let positions = cols.iter().filter(|c| c.1 > 0).count() as f64;
    let s2: f64 = cols
        .iter()
        .filter(|c| c.1 > 0)
        .map(|&(m, nt)| nt as f64 / n as f64 * m * m)
        .sum::<f64>()
        / positions;
    let zk = if ue == 0.0 { 0.0 } else { ue / s2.sqrt() };
    let t_df = positions - 2.0;
    let rest = positions - 1.0 - zk * zk;
    let t = if rest > 0.0 {
        zk * (t_df / rest).sqrt()
    } else {
        zk.signum() * f64::INFINITY
    };

    let r_bar_u = if n < 2 {
        0.0
    } else {
        let est_u = u.columns(0, tau0).into_owned();
        mean_pairwise_correlation(&est_u)?.mean.clamp(-1.0 / (n - 1) as f64, 1.0)
    };
    let z_adj = patell_adjust(z, n, r_bar_u)?;
    Ok(GrankStats { z, z_adj, t, t_df, r_bar_u })
}
