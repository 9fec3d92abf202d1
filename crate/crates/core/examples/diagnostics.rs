//! Estimation-window diagnostics of abnormal values for the four models.

use stevent::diagnostics::{diagnostics_table, HampelOptions};
use stevent::eventstudy::{compute_abnormal, AbnormalPanel};
use stevent::hdgm::{HdgmParams, Smoothness};
use stevent::model::{fit_model, normal_values, ModelOptions, NcModel};
use stevent::simgen::{simulate_panel, SimConfig, StationLayout};

fn main() -> stevent::Result<()> {
    let cfg = SimConfig {
        n_stations: 6,
        tau0: 150,
        tau1: 10,
        params: HdgmParams {
            beta: vec![30.0, 2.0],
            g: 0.8,
            nu: 3.0,
            theta: 40.0,
            sigma2_eps: 1.0,
            smoothness: Smoothness::Half,
        },
        layout: StationLayout::Square { side_km: 50.0 },
        n_covariates: 1,
        shift: 0.0,
        seed: 9,
    };
    let sim = simulate_panel(&cfg)?;
    let mut panels: Vec<(String, AbnormalPanel)> = Vec::new();
    for model in NcModel::ALL {
        let fit = fit_model(&sim.panel, &sim.split, model, &ModelOptions::default())?;
        let nc = normal_values(&sim.panel, &sim.split, &fit)?;
        panels.push((model.to_string(), compute_abnormal(&sim.panel, &nc, &sim.split)?));
    }
    let cols: Vec<(String, &AbnormalPanel)> = panels.iter().map(|(m, a)| (m.clone(), a)).collect();
    let table = diagnostics_table(&cols, &HampelOptions::default())?;
    println!("{}", table.to_table());
    Ok(())
}
