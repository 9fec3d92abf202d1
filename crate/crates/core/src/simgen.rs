//! Synthetic HDGM panels with an optional event-window level shift, and the
//! Monte Carlo size/power harness.

use std::sync::atomic::{AtomicUsize, Ordering};

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eventstudy::{compute_abnormal_with, AbnormalOptions, RowStatus, StatRegistry, Tail};
use crate::hdgm::{matern_matrix, HdgmParams};
use crate::model::{fit_model, normal_values, ModelOptions, NcModel};
use crate::panel::{DistanceMatrix, Panel, Station, WindowSplit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StationLayout {
    /// Stations uniform in a square of the given side, in km.
    Square { side_km: f64 },
    Explicit { coords: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_stations: usize,
    pub tau0: usize,
    pub tau1: usize,
    /// `beta` holds the intercept followed by one slope per covariate;
    /// `nu = 0` switches the latent field off.
    pub params: HdgmParams,
    pub layout: StationLayout,
    /// Standard-normal covariates besides the intercept.
    pub n_covariates: usize,
    /// Event-window level change in units of the marginal sd.
    #[serde(default)]
    pub shift: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_stations == 0 {
            return bad("n_stations must be positive".into());
        }
        if self.tau1 == 0 {
            return bad("tau1 must be positive".into());
        }
        WindowSplit::new(0, self.tau0, self.tau0 + self.tau1).map_err(|e| Error::Config(e.to_string()))?;
        let p = &self.params;
        if !(p.g.abs() < 1.0) || !(p.nu >= 0.0) || !(p.theta > 0.0) || !(p.sigma2_eps > 0.0) {
            return bad(format!(
                "need |g| < 1, nu >= 0, theta > 0, sigma2_eps > 0; got g = {}, nu = {}, theta = {}, sigma2_eps = {}",
                p.g, p.nu, p.theta, p.sigma2_eps
            ));
        }
        if p.beta.len() != self.n_covariates + 1 {
            return bad(format!(
                "beta has {} entries, expected intercept + {} covariates",
                p.beta.len(),
                self.n_covariates
            ));
        }
        if !self.shift.is_finite() {
            return bad("shift must be finite".into());
        }
        match &self.layout {
            StationLayout::Square { side_km } if !(*side_km > 0.0) => bad("layout side must be positive".into()),
            StationLayout::Explicit { coords } if coords.len() != self.n_stations => {
                bad(format!("{} coordinates for {} stations", coords.len(), self.n_stations))
            }
            _ => Ok(()),
        }
    }

    /// Marginal sd `√(ν/(1-g²) + σ²_ε)`, the unit of [`shift`](Self::shift).
    pub fn marginal_sd(&self) -> f64 {
        let p = &self.params;
        (p.nu / (1.0 - p.g * p.g) + p.sigma2_eps).sqrt()
    }
}

/// A simulated panel with its ground truth.
#[derive(Debug, Clone)]
pub struct SimulatedPanel {
    pub panel: Panel,
    pub split: WindowSplit,
    /// Latent field `w`, `N × τ`.
    pub latent: DMatrix<f64>,
    pub params: HdgmParams,
    /// Level change added over the event window, in data units.
    pub shift_size: f64,
}

/// Random stream `stream` of the root `seed`.
pub fn replication_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn simulate_panel(cfg: &SimConfig) -> Result<SimulatedPanel> {
    simulate_replication(cfg, 0)
}

/// Simulates replication `r`; each replication has its own random stream,
/// so any one can be regenerated alone.
pub fn simulate_replication(cfg: &SimConfig, r: u64) -> Result<SimulatedPanel> {
    cfg.validate()?;
    let mut rng = replication_rng(cfg.seed, r);
    let (n, tau) = (cfg.n_stations, cfg.tau0 + cfg.tau1);
    let coords: Vec<(f64, f64)> = match &cfg.layout {
        StationLayout::Square { side_km } => (0..n)
            .map(|_| (rng.random::<f64>() * side_km, rng.random::<f64>() * side_km))
            .collect(),
        StationLayout::Explicit { coords } => coords.clone(),
    };
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let covs: Vec<DMatrix<f64>> = (0..cfg.n_covariates)
        .map(|_| DMatrix::from_fn(n, tau, |_, _| normal()))
        .collect();

    let p = &cfg.params;
    let mut latent = DMatrix::zeros(n, tau);
    if p.nu > 0.0 {
        let m = matern_matrix(&DistanceMatrix::from_coordinates(&coords), p.theta, p.smoothness)?;
        let l = psd_factor(&m)?;
        let draw = |z: DVector<f64>| &l * z;
        let stat_sd = (p.nu / (1.0 - p.g * p.g)).sqrt();
        let mut w = draw(DVector::from_fn(n, |_, _| normal())) * stat_sd;
        for t in 0..tau {
            if t > 0 {
                w = &w * p.g + draw(DVector::from_fn(n, |_, _| normal())) * p.nu.sqrt();
            }
            latent.set_column(t, &w);
        }
    }
    let shift_size = cfg.shift * cfg.marginal_sd();
    let sd_eps = p.sigma2_eps.sqrt();
    let y = DMatrix::from_fn(n, tau, |s, t| {
        let mut v = p.beta[0] + latent[(s, t)];
        for (k, c) in covs.iter().enumerate() {
            v += p.beta[k + 1] * c[(s, t)];
        }
        if t >= cfg.tau0 {
            v += shift_size;
        }
        v
    }) + DMatrix::from_fn(n, tau, |_, _| sd_eps * normal());

    let stations = coords
        .iter()
        .enumerate()
        .map(|(i, &(x, yc))| Station::new(format!("S{:03}", i + 1), x, yc))
        .collect();
    let d0 = NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date");
    let timeline = (0..tau).map(|t| d0 + chrono::Days::new(t as u64)).collect();
    let mut names = vec!["intercept".to_string()];
    names.extend((1..=cfg.n_covariates).map(|k| format!("x{k}")));
    let mut all_covs = vec![DMatrix::from_element(n, tau, 1.0)];
    all_covs.extend(covs);
    let panel = Panel::new(stations, timeline, y, all_covs, names)?;
    Ok(SimulatedPanel {
        panel,
        split: WindowSplit::new(0, cfg.tau0, tau)?,
        latent,
        params: p.clone(),
        shift_size,
    })
}

/// Lower factor `L` with `L Lᵀ = M` for a positive semidefinite `M`;
/// falls back to the eigen decomposition when Cholesky fails.
fn psd_factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(c) = m.clone().cholesky() {
        return Ok(c.l());
    }
    let eig = m.clone().symmetric_eigen();
    if eig.eigenvalues.min() < -1e-8 {
        return Err(Error::Numerical("Matérn matrix is not positive semidefinite".into()));
    }
    let sqrt = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt))
}

/// A dependence setting of the Monte Carlo grid; unset fields keep the
/// base configuration's values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct McScenario {
    pub label: String,
    pub g: Option<f64>,
    pub nu: Option<f64>,
    pub theta: Option<f64>,
    pub sigma2_eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub base: SimConfig,
    pub scenarios: Vec<McScenario>,
    /// Shifts in marginal-sd units; one grid cell per shift.
    pub shifts: Vec<f64>,
    pub models: Vec<NcModel>,
    pub replications: usize,
    /// Statistic ids; empty means every available one.
    #[serde(default)]
    pub stats: Vec<String>,
    #[serde(default)]
    pub abnormal: AbnormalOptions,
    #[serde(default)]
    pub model_options: ModelOptions,
    #[serde(default)]
    pub tail: Tail,
}

pub const ALPHAS: [f64; 3] = [0.01, 0.05, 0.10];

/// Share of failed replications above which a cell is marked invalid.
pub const MAX_FAILURE_RATE: f64 = 0.10;

impl McConfig {
    pub fn validate(&self, registry: &StatRegistry) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be positive".into()));
        }
        if self.scenarios.is_empty() || self.shifts.is_empty() || self.models.is_empty() {
            return Err(Error::Config("scenarios, shifts and models must be non-empty".into()));
        }
        for sc in &self.scenarios {
            for &shift in &self.shifts {
                self.cell_config(sc, shift, 0).validate()?;
            }
        }
        for id in &self.stats {
            registry.resolve(id)?;
        }
        Ok(())
    }

    fn cell_config(&self, sc: &McScenario, shift: f64, scenario_index: usize) -> SimConfig {
        let mut cfg = self.base.clone();
        let p = &mut cfg.params;
        p.g = sc.g.unwrap_or(p.g);
        p.nu = sc.nu.unwrap_or(p.nu);
        p.theta = sc.theta.unwrap_or(p.theta);
        p.sigma2_eps = sc.sigma2_eps.unwrap_or(p.sigma2_eps);
        cfg.shift = shift;
        // all shifts and models of a scenario share its random streams
        cfg.seed = self.base.seed.wrapping_add((scenario_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        cfg
    }
}

/// Rejection rates of one statistic in one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub scenario: String,
    pub shift: f64,
    pub model: NcModel,
    pub stat_id: String,
    pub replications: usize,
    pub failures: usize,
    pub failure_rate: f64,
    pub valid: bool,
    /// Average residual cross-correlation over successful replications.
    pub mean_r_bar: f64,
    /// Replications where this statistic produced a value.
    pub n: usize,
    pub rate_01: f64,
    pub rate_05: f64,
    pub rate_10: f64,
    pub se_01: f64,
    pub se_05: f64,
    pub se_10: f64,
}

impl McRow {
    pub fn rate(&self, alpha: f64) -> f64 {
        match alpha {
            a if a == 0.01 => self.rate_01,
            a if a == 0.05 => self.rate_05,
            a if a == 0.10 => self.rate_10,
            _ => f64::NAN,
        }
    }

    pub fn se(&self, alpha: f64) -> f64 {
        match alpha {
            a if a == 0.01 => self.se_01,
            a if a == 0.05 => self.se_05,
            a if a == 0.10 => self.se_10,
            _ => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub replications: usize,
    pub rows: Vec<McRow>,
}

impl McReport {
    pub fn row(&self, scenario: &str, shift: f64, model: NcModel, stat_id: &str) -> Option<&McRow> {
        self.rows
            .iter()
            .find(|r| r.scenario == scenario && r.shift == shift && r.model == model && r.stat_id == stat_id)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Outcome of one replication: `(r_bar, [(stat_id, p)])`, or the failure.
type RepOutcome = std::result::Result<(f64, Vec<(String, Option<f64>)>), String>;

fn one_replication(
    cfg: &SimConfig,
    r: u64,
    model: NcModel,
    mc: &McConfig,
    registry: &StatRegistry,
) -> RepOutcome {
    let run = || -> Result<(f64, Vec<(String, Option<f64>)>)> {
        let sim = simulate_replication(cfg, r)?;
        let fit = fit_model(&sim.panel, &sim.split, model, &mc.model_options)?;
        let nc = normal_values(&sim.panel, &sim.split, &fit)?;
        let abn = compute_abnormal_with(&sim.panel, &nc, &sim.split, &mc.abnormal)?;
        let rep = registry.run(&abn, &mc.stats, mc.tail)?;
        let ps = rep
            .rows
            .into_iter()
            .filter(|row| row.status != RowStatus::Unavailable)
            .map(|row| (row.stat_id, row.p_value))
            .collect();
        Ok((abn.r_bar(), ps))
    };
    run().map_err(|e| e.to_string())
}

/// Runs every scenario × shift × model cell for `replications` seeded
/// replications and tallies rejections at [`ALPHAS`].
pub fn run_monte_carlo(mc: &McConfig) -> Result<McReport> {
    let registry = StatRegistry::default();
    mc.validate(&registry)?;
    if mc.replications < 200 {
        log::warn!("{} replications; at least 200 are advised for reporting", mc.replications);
    }
    let n_cells = mc.scenarios.len() * mc.shifts.len() * mc.models.len();
    let total = n_cells * mc.replications;
    let done = AtomicUsize::new(0);
    let mut rows = Vec::new();
    for (si, sc) in mc.scenarios.iter().enumerate() {
        for &shift in &mc.shifts {
            let cfg = mc.cell_config(sc, shift, si);
            for &model in &mc.models {
                let outcomes: Vec<RepOutcome> = (0..mc.replications as u64)
                    .into_par_iter()
                    .map(|r| {
                        let out = one_replication(&cfg, r, model, mc, &registry);
                        let k = done.fetch_add(1, Ordering::Relaxed) + 1;
                        if k % (total / 10).max(1) == 0 {
                            log::info!("monte carlo: {k}/{total} replications");
                        }
                        out
                    })
                    .collect();
                rows.extend(tally(&sc.label, shift, model, mc.replications, &outcomes));
            }
        }
    }
    Ok(McReport {
        replications: mc.replications,
        rows,
    })
}

fn tally(scenario: &str, shift: f64, model: NcModel, reps: usize, outcomes: &[RepOutcome]) -> Vec<McRow> {
    let failures = outcomes.iter().filter(|o| o.is_err()).count();
    for e in outcomes.iter().filter_map(|o| o.as_ref().err()).take(3) {
        log::warn!("replication failed in {scenario}/{shift}/{model}: {e}");
    }
    let ok: Vec<&(f64, Vec<(String, Option<f64>)>)> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let failure_rate = failures as f64 / reps as f64;
    let mean_r_bar = if ok.is_empty() {
        f64::NAN
    } else {
        ok.iter().map(|o| o.0).sum::<f64>() / ok.len() as f64
    };
    let ids: Vec<String> = ok.first().map(|o| o.1.iter().map(|(id, _)| id.clone()).collect()).unwrap_or_default();
    ids.into_iter()
        .enumerate()
        .map(|(k, stat_id)| {
            let ps: Vec<f64> = ok.iter().filter_map(|o| o.1[k].1).collect();
            let n = ps.len();
            let rate = |a: f64| {
                if n == 0 {
                    f64::NAN
                } else {
                    ps.iter().filter(|&&p| p < a).count() as f64 / n as f64
                }
            };
            let se = |p: f64| (p * (1.0 - p) / n as f64).sqrt();
            let (r1, r5, r10) = (rate(0.01), rate(0.05), rate(0.10));
            McRow {
                scenario: scenario.to_string(),
                shift,
                model,
                stat_id,
                replications: reps,
                failures,
                failure_rate,
                valid: failure_rate <= MAX_FAILURE_RATE,
                mean_r_bar,
                n,
                rate_01: r1,
                rate_05: r5,
                rate_10: r10,
                se_01: se(r1),
                se_05: se(r5),
                se_10: se(r10),
            }
        })
        .collect()
}
