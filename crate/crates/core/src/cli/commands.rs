use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{EventScenario, RunConfig};
use crate::baselines::BaselineSummaryRow;
use crate::diagnostics::diagnostics_table;
use crate::error::{Error, Result};
use crate::eventstudy::{compute_abnormal_with, mean_ac_csv, AbnormalPanel, BatteryReport, RowStatus, StatRegistry};
use crate::model::{fit_model, normal_values, ModelFit, NcModel};
use crate::panel::{split_windows_until, Panel, WindowSplit};
use crate::simgen::run_monte_carlo;

/// Writes `contents` to `path` through a temporary sibling and a rename,
/// creating parent directories.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn prepare_out(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    write_atomic(&cfg.out.join("config.toml"), &cfg.to_toml()?)
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

struct Prepared {
    panel: Panel,
    scenarios: Vec<(EventScenario, WindowSplit)>,
    models: Vec<NcModel>,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let models = cfg.model_list()?;
    cfg.check_stats(&StatRegistry::default())?;
    let scenarios = cfg.scenarios()?;
    let panel = cfg.data()?.load_panel()?;
    let scenarios = scenarios
        .into_iter()
        .map(|s| {
            let split = split_windows_until(&panel, s.date, s.end)?;
            Ok((s, split))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Prepared {
        panel,
        scenarios,
        models,
    })
}

#[derive(Debug, Serialize)]
struct IngestSummary {
    n_stations: usize,
    n_times: usize,
    first_date: NaiveDate,
    last_date: NaiveDate,
    first_usable: usize,
    covariates: Vec<String>,
    stations: Vec<StationSummary>,
    windows: Vec<WindowSummary>,
}

#[derive(Debug, Serialize)]
struct StationSummary {
    id: String,
    missing_rate: f64,
}

#[derive(Debug, Serialize)]
struct WindowSummary {
    scenario: String,
    event_date: NaiveDate,
    tau0: usize,
    tau1: usize,
}

/// Ingests the configured files and writes `ingest_summary.json`.
pub fn cmd_ingest_check(cfg: &RunConfig) -> Result<()> {
    let panel = cfg.data()?.load_panel()?;
    let windows = match &cfg.event {
        Some(_) => cfg
            .scenarios()?
            .into_iter()
            .map(|s| {
                let split = split_windows_until(&panel, s.date, s.end)?;
                Ok(WindowSummary {
                    scenario: s.label,
                    event_date: s.date,
                    tau0: split.tau0(),
                    tau1: split.tau1(),
                })
            })
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    let tl = panel.timeline();
    let summary = IngestSummary {
        n_stations: panel.n_stations(),
        n_times: panel.n_times(),
        first_date: tl[0],
        last_date: tl[tl.len() - 1],
        first_usable: panel.first_usable(),
        covariates: panel.covariate_names().to_vec(),
        stations: panel
            .station_ids()
            .into_iter()
            .zip(panel.missing_rates())
            .map(|(id, missing_rate)| StationSummary { id, missing_rate })
            .collect(),
        windows,
    };
    prepare_out(cfg)?;
    write_atomic(
        &cfg.out.join("ingest_summary.json"),
        &serde_json::to_string_pretty(&summary)?,
    )?;
    println!(
        "{} stations x {} days ({} .. {}), {} covariates",
        summary.n_stations,
        summary.n_times,
        summary.first_date,
        summary.last_date,
        summary.covariates.len()
    );
    for w in &summary.windows {
        println!("  {}: event {} tau0 = {} tau1 = {}", w.scenario, w.event_date, w.tau0, w.tau1);
    }
    Ok(())
}

/// Persisted fit of one model for one event scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArtifact {
    pub scenario: String,
    pub event_date: NaiveDate,
    #[serde(default)]
    pub end_date: Option<NaiveDate>,
    pub tau0: usize,
    pub tau1: usize,
    pub fit: ModelFit,
}

fn artifact_path(root: &Path, scenario: &str, model: NcModel) -> PathBuf {
    root.join(scenario).join(format!("{model}.json"))
}

fn fit_one(p: &Prepared, cfg: &RunConfig, sc: &EventScenario, split: &WindowSplit, model: NcModel) -> Result<FitArtifact> {
    let fit = fit_model(&p.panel, split, model, &cfg.options.model_options())?;
    Ok(FitArtifact {
        scenario: sc.label.clone(),
        event_date: sc.date,
        end_date: sc.end,
        tau0: split.tau0(),
        tau1: split.tau1(),
        fit,
    })
}

/// Fits every scenario x model pair in parallel, logging each failure.
fn fit_all(p: &Prepared, cfg: &RunConfig) -> Vec<(usize, NcModel, Result<FitArtifact>)> {
    let jobs: Vec<(usize, NcModel)> = (0..p.scenarios.len())
        .flat_map(|i| p.models.iter().map(move |&m| (i, m)))
        .collect();
    jobs.into_par_iter()
        .map(|(i, m)| {
            let (sc, split) = &p.scenarios[i];
            log::info!("fitting {m} for scenario {}", sc.label);
            let r = fit_one(p, cfg, sc, split, m);
            if let Err(e) = &r {
                log::error!("{m} fit failed for scenario {}: {e}", sc.label);
            }
            (i, m, r)
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct FitStatusRow {
    scenario: String,
    model: NcModel,
    status: &'static str,
    converged: Option<bool>,
    loglik: Option<f64>,
    warnings: usize,
    message: String,
}

#[derive(Debug, Serialize)]
struct HdgmSummaryRow {
    model: NcModel,
    g: f64,
    nu: f64,
    theta: f64,
    sigma2_eps: f64,
    loglik: f64,
    iterations: usize,
    converged: bool,
    beta: String,
}

fn fit_summary_csv(fit: &ModelFit) -> Result<String> {
    match &fit.hdgm {
        Some(h) => to_csv(&[HdgmSummaryRow {
            model: fit.model,
            g: h.params.g,
            nu: h.params.nu,
            theta: h.params.theta,
            sigma2_eps: h.params.sigma2_eps,
            loglik: h.loglik,
            iterations: h.iterations,
            converged: h.converged,
            beta: h.params.beta.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(";"),
        }]),
        None => to_csv(&fit.baselines.iter().map(|b| b.summary_row()).collect::<Vec<BaselineSummaryRow>>()),
    }
}

fn first_failure<T>(results: Vec<(String, Result<T>)>) -> Result<Vec<T>> {
    let mut ok = Vec::new();
    let mut failed: Vec<(String, Error)> = Vec::new();
    for (what, r) in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => failed.push((what, e)),
        }
    }
    if failed.is_empty() {
        return Ok(ok);
    }
    for (what, e) in &failed {
        eprintln!("{what}: {e}");
    }
    Err(failed.swap_remove(0).1)
}

/// Fits the selected models for every scenario and writes one artifact
/// per pair under `fits/<scenario>/<model>.json`.
pub fn cmd_fit(cfg: &RunConfig) -> Result<()> {
    let p = prepare(cfg)?;
    prepare_out(cfg)?;
    let root = cfg.out.join("fits");
    let mut status = Vec::new();
    let mut results = Vec::new();
    for (i, m, r) in fit_all(&p, cfg) {
        let label = p.scenarios[i].0.label.clone();
        let row = match &r {
            Ok(a) => {
                let path = artifact_path(&root, &label, m);
                write_atomic(&path, &serde_json::to_string_pretty(a)?)?;
                write_atomic(&path.with_extension("csv"), &fit_summary_csv(&a.fit)?)?;
                if let Some(h) = &a.fit.hdgm {
                    if !h.converged {
                        log::warn!("HDGM did not converge for scenario {label} ({} iterations)", h.iterations);
                    }
                }
                FitStatusRow {
                    scenario: label.clone(),
                    model: m,
                    status: "ok",
                    converged: Some(a.fit.converged()),
                    loglik: a.fit.hdgm.as_ref().map(|h| h.loglik),
                    warnings: a.fit.warnings.len(),
                    message: String::new(),
                }
            }
            Err(e) => FitStatusRow {
                scenario: label.clone(),
                model: m,
                status: "error",
                converged: None,
                loglik: None,
                warnings: 0,
                message: e.to_string(),
            },
        };
        status.push(row);
        results.push((format!("{m} fit for scenario {label}"), r));
    }
    write_atomic(&root.join("fit_status.csv"), &to_csv(&status)?)?;
    for s in &status {
        println!(
            "{:<12} {:<8} {:<6} converged={}",
            s.scenario,
            s.model.as_str(),
            s.status,
            s.converged.map_or("-".to_string(), |c| c.to_string())
        );
    }
    first_failure(results).map(|_| ())
}

fn load_artifact(root: &Path, sc: &EventScenario, split: &WindowSplit, model: NcModel) -> Result<FitArtifact> {
    let path = artifact_path(root, &sc.label, model);
    if !path.exists() {
        return Err(Error::Config(format!(
            "no {model} fit for scenario `{}` at {}; run `stevent fit` with the same config first, or drop --from-fits to fit in-line",
            sc.label,
            path.display()
        )));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let a: FitArtifact = serde_json::from_str(&text)?;
    if a.event_date != sc.date || a.tau0 != split.tau0() || a.tau1 != split.tau1() || a.fit.model != model {
        return Err(Error::Config(format!(
            "{} was fitted for a different window or model (event {}, tau0 {}, tau1 {}); refit with `stevent fit`",
            path.display(),
            a.event_date,
            a.tau0,
            a.tau1
        )));
    }
    Ok(a)
}

/// Abnormal panels for every scenario x model, fitted in-line or loaded.
fn abnormal_panels(
    p: &Prepared,
    cfg: &RunConfig,
    from_fits: Option<&Path>,
) -> Result<Vec<(usize, NcModel, AbnormalPanel)>> {
    let fits: Vec<(usize, NcModel, Result<FitArtifact>)> = match from_fits {
        Some(root) => {
            let mut v = Vec::new();
            for (i, (sc, split)) in p.scenarios.iter().enumerate() {
                for &m in &p.models {
                    v.push((i, m, Ok(load_artifact(root, sc, split, m)?)));
                }
            }
            v
        }
        None => fit_all(p, cfg),
    };
    let results = fits
        .into_iter()
        .map(|(i, m, r)| {
            let (sc, split) = &p.scenarios[i];
            let what = format!("{m} for scenario {}", sc.label);
            let abn = r.and_then(|a| {
                let nc = normal_values(&p.panel, split, &a.fit)?;
                compute_abnormal_with(&p.panel, &nc, split, &cfg.options.abnormal)
            });
            (what, abn.map(|a| (i, m, a)))
        })
        .collect();
    first_failure(results)
}

/// Sign of each statistic across scenarios for one model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignConsistencyRow {
    pub model: NcModel,
    pub stat_id: String,
    /// `scenario=value` pairs.
    pub values: String,
    pub consistent: bool,
}

fn sign_consistency(
    labels: &[String],
    reports: &BTreeMap<(NcModel, usize), BatteryReport>,
    models: &[NcModel],
) -> Vec<SignConsistencyRow> {
    let mut rows = Vec::new();
    for &m in models {
        let Some(first) = reports.get(&(m, 0)) else { continue };
        for r in first.rows.iter().filter(|r| r.status == RowStatus::Ok) {
            let vals: Vec<Option<f64>> = (0..labels.len())
                .map(|i| reports.get(&(m, i)).and_then(|rep| rep.value(&r.stat_id)))
                .collect();
            let signs: Vec<f64> = vals.iter().flatten().map(|v| v.signum()).collect();
            let consistent =
                signs.len() == labels.len() && signs.iter().all(|&s| s == signs[0]) && vals.iter().flatten().all(|v| *v != 0.0);
            rows.push(SignConsistencyRow {
                model: m,
                stat_id: r.stat_id.clone(),
                values: labels
                    .iter()
                    .zip(&vals)
                    .map(|(l, v)| format!("{l}={}", v.map_or("NA".into(), |x| format!("{x:.4}"))))
                    .collect::<Vec<_>>()
                    .join(";"),
                consistent,
            });
        }
    }
    rows
}

/// Battery, diagnostics and plot data per scenario and model, plus a
/// cross-scenario sign summary when several event windows are given.
pub fn cmd_evstudy(cfg: &RunConfig, from_fits: Option<&Path>) -> Result<()> {
    let p = prepare(cfg)?;
    prepare_out(cfg)?;
    let registry = StatRegistry::default();
    let panels = abnormal_panels(&p, cfg, from_fits)?;
    let root = cfg.out.join("evstudy");
    let labels: Vec<String> = p.scenarios.iter().map(|(s, _)| s.label.clone()).collect();
    let mut reports = BTreeMap::new();
    for (i, m, abn) in &panels {
        let dir = root.join(&labels[*i]).join(m.as_str());
        let rep = registry.run(abn, &cfg.stats, cfg.tail)?;
        write_atomic(&dir.join("battery.csv"), &rep.to_csv()?)?;
        write_atomic(&dir.join("battery.json"), &rep.to_json()?)?;
        write_atomic(&dir.join("plot.csv"), &mean_ac_csv(abn)?)?;
        println!("== scenario {} / {m} (r_bar = {:.3}) ==", labels[*i], abn.r_bar());
        println!("{}", rep.to_table());
        reports.insert((*m, *i), rep);
    }
    for (i, label) in labels.iter().enumerate() {
        let cols: Vec<(String, &AbnormalPanel)> = panels
            .iter()
            .filter(|(j, _, _)| *j == i)
            .map(|(_, m, a)| (m.as_str().to_string(), a))
            .collect();
        match diagnostics_table(&cols, &cfg.options.hampel) {
            Ok(t) => write_atomic(&root.join(label).join("diagnostics.csv"), &t.to_csv()?)?,
            Err(e) => log::warn!("diagnostics skipped for scenario {label}: {e}"),
        }
    }
    if labels.len() > 1 {
        let rows = sign_consistency(&labels, &reports, &p.models);
        write_atomic(&root.join("sign_consistency.csv"), &to_csv(&rows)?)?;
        let n_ok = rows.iter().filter(|r| r.consistent).count();
        println!("sign-consistent across {} scenarios: {n_ok}/{} statistics", labels.len(), rows.len());
    }
    Ok(())
}

/// Estimation-window diagnostics table per scenario.
pub fn cmd_diagnostics(cfg: &RunConfig) -> Result<()> {
    let p = prepare(cfg)?;
    prepare_out(cfg)?;
    let panels = abnormal_panels(&p, cfg, None)?;
    for (i, (sc, _)) in p.scenarios.iter().enumerate() {
        let cols: Vec<(String, &AbnormalPanel)> = panels
            .iter()
            .filter(|(j, _, _)| *j == i)
            .map(|(_, m, a)| (m.as_str().to_string(), a))
            .collect();
        let table = diagnostics_table(&cols, &cfg.options.hampel)?;
        write_atomic(
            &cfg.out.join("diagnostics").join(&sc.label).join("diagnostics.csv"),
            &table.to_csv()?,
        )?;
        println!("== scenario {} ==\n{}", sc.label, table.to_table());
    }
    Ok(())
}

/// Runs the Monte Carlo grid and writes `mc_report.csv` and `.json`.
pub fn cmd_mc(cfg: &RunConfig) -> Result<()> {
    let mc = cfg.mc_config();
    mc.validate(&StatRegistry::default())?;
    prepare_out(cfg)?;
    let report = run_monte_carlo(&mc)?;
    write_atomic(&cfg.out.join("mc_report.csv"), &report.to_csv()?)?;
    write_atomic(&cfg.out.join("mc_report.json"), &report.to_json()?)?;
    let invalid = report.rows.iter().filter(|r| !r.valid).count();
    println!(
        "{} rows, {} replications per cell, {invalid} invalid cells",
        report.rows.len(),
        report.replications
    );
    Ok(())
}
