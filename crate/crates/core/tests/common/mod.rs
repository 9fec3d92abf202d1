//! Dense joint-Gaussian reference computations for small HDGM instances.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use stevent::hdgm::{matern_matrix, HdgmParams};
use stevent::panel::DistanceMatrix;

/// Covariance of the stacked latent field `(w_0, …, w_{T-1})`, index
/// `t·N + s`, built directly from the stationary AR(1)-in-time,
/// Matérn-in-space definition.
pub fn latent_cov(dist: &DistanceMatrix, p: &HdgmParams, t_len: usize) -> DMatrix<f64> {
    let n = dist.len();
    let m = matern_matrix(dist, p.theta, p.smoothness).unwrap();
    let var = p.nu / (1.0 - p.g * p.g);
    DMatrix::from_fn(n * t_len, n * t_len, |i, j| {
        let (ti, si) = (i / n, i % n);
        let (tj, sj) = (j / n, j % n);
        let lag = (ti as i32 - tj as i32).unsigned_abs() as i32;
        p.g.powi(lag) * var * m[(si, sj)]
    })
}

pub struct Oracle {
    pub loglik: f64,
    /// `E[w | y_obs]` stacked as `t·N + s`.
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Conditions the latent field over `t_total` points on the observed
/// cells of `y` (`N × T_obs`, `T_obs ≤ t_total`), with `offsets = x'β`.
pub fn condition(
    dist: &DistanceMatrix,
    p: &HdgmParams,
    y: &DMatrix<f64>,
    offsets: &DMatrix<f64>,
    t_total: usize,
) -> Oracle {
    let n = dist.len();
    let lat = latent_cov(dist, p, t_total);
    let obs: Vec<usize> = (0..y.ncols())
        .flat_map(|t| (0..n).map(move |s| (s, t)))
        .filter(|&(s, t)| !y[(s, t)].is_nan())
        .map(|(s, t)| t * n + s)
        .collect();
    let m = obs.len();
    let mut sigma = DMatrix::from_fn(m, m, |i, j| lat[(obs[i], obs[j])]);
    for i in 0..m {
        sigma[(i, i)] += p.sigma2_eps;
    }
    let r = DVector::from_iterator(m, obs.iter().map(|&k| y[(k % n, k / n)] - offsets[(k % n, k / n)]));
    let chol = sigma.clone().cholesky().unwrap();
    let alpha = chol.solve(&r);
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let loglik = -0.5 * (m as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + r.dot(&alpha));
    let c_wo = DMatrix::from_fn(n * t_total, m, |i, j| lat[(i, obs[j])]);
    let mean = &c_wo * alpha;
    let cov = &lat - &c_wo * chol.solve(&c_wo.transpose());
    Oracle { loglik, mean, cov }
}

/// Autocovariances `γ(0..n)` of a unit-variance ARMA process from its
/// ψ-weights.
pub fn arma_acvf(ar: &[f64], ma: &[f64], n: usize, terms: usize) -> Vec<f64> {
    let mut psi = vec![0.0; terms];
    psi[0] = 1.0;
    for j in 1..terms {
        let mut v = if j <= ma.len() { ma[j - 1] } else { 0.0 };
        for (i, a) in ar.iter().enumerate() {
            if j > i {
                v += a * psi[j - 1 - i];
            }
        }
        psi[j] = v;
    }
    (0..n)
        .map(|h| (0..terms - h).map(|j| psi[j] * psi[j + h]).sum())
        .collect()
}

/// Concentrated exact loglikelihood of a regression with ARMA errors at
/// fixed coefficients, by dense GLS on the observed rows.
pub fn dense_arma_profile(y: &[f64], x: &DMatrix<f64>, ar: &[f64], ma: &[f64]) -> (f64, DVector<f64>) {
    let obs: Vec<usize> = (0..y.len()).filter(|&t| !y[t].is_nan()).collect();
    let n = obs.len();
    let g = arma_acvf(ar, ma, y.len(), 20_000);
    let v = DMatrix::from_fn(n, n, |i, j| g[(obs[i] as i64 - obs[j] as i64).unsigned_abs() as usize]);
    let chol = v.cholesky().unwrap();
    let xo = x.select_rows(obs.iter());
    let yo = DVector::from_iterator(n, obs.iter().map(|&t| y[t]));
    let vix = chol.solve(&xo);
    let viy = chol.solve(&yo);
    let beta = (xo.transpose() * &vix).cholesky().unwrap().solve(&(xo.transpose() * &viy));
    let r = &yo - &xo * &beta;
    let q = r.dot(&chol.solve(&r));
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let s2 = q / n as f64;
    let ll = -0.5 * n as f64 * ((2.0 * std::f64::consts::PI).ln() + s2.ln() + 1.0) - 0.5 * log_det;
    (ll, beta)
}

/// Regression `y = 1 + 0.5·x + u` with ARMA errors driven by standard
/// normal innovations; `x` is standard normal. Returns `(y, [1 | x])`.
pub fn simulate_regarma(seed: u64, n: usize, ar: &[f64], ma: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let burn = 500;
    let e: Vec<f64> = (0..n + burn).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut u = vec![0.0; n + burn];
    for t in 0..n + burn {
        let mut v = e[t];
        for (j, m) in ma.iter().enumerate() {
            if t > j {
                v += m * e[t - 1 - j];
            }
        }
        for (i, a) in ar.iter().enumerate() {
            if t > i {
                v += a * u[t - 1 - i];
            }
        }
        u[t] = v;
    }
    let x = DMatrix::from_fn(n, 2, |_, j| if j == 0 { 1.0 } else { StandardNormal.sample(&mut rng) });
    let y = (0..n).map(|t| 1.0 + 0.5 * x[(t, 1)] + u[t + burn]).collect();
    (y, x)
}

pub fn names(p: usize) -> Vec<String> {
    (0..p).map(|i| format!("x{i}")).collect()
}

/// Writes a panel as the three ingest CSV files, skipping a covariate
/// named `intercept`; returns (stations, observations, covariates).
pub fn write_panel_csv(
    panel: &stevent::panel::Panel,
    dir: &std::path::Path,
) -> (std::path::PathBuf, std::path::PathBuf, std::path::PathBuf) {
    use std::fmt::Write;
    let (sp, op, cp) = (dir.join("stations.csv"), dir.join("obs.csv"), dir.join("covs.csv"));
    let mut st = String::from("id,x,y\n");
    for s in panel.stations() {
        writeln!(st, "{},{},{}", s.id, s.x, s.y).unwrap();
    }
    let mut ob = String::from("station_id,timestamp,value\n");
    let mut cv = String::from("station_id,timestamp,name,value\n");
    for (i, s) in panel.stations().iter().enumerate() {
        for (t, d) in panel.timeline().iter().enumerate() {
            match panel.obs(i, t) {
                Some(v) => writeln!(ob, "{},{d},{v}", s.id).unwrap(),
                None => writeln!(ob, "{},{d},NA", s.id).unwrap(),
            }
            for (k, name) in panel.covariate_names().iter().enumerate() {
                if name != "intercept" {
                    writeln!(cv, "{},{d},{name},{}", s.id, panel.covariate(k)[(i, t)]).unwrap();
                }
            }
        }
    }
    std::fs::write(&sp, st).unwrap();
    std::fs::write(&op, ob).unwrap();
    std::fs::write(&cp, cv).unwrap();
    (sp, op, cp)
}
