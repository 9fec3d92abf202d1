//! The same event analysed with three event-window choices, checking that
//! each statistic keeps its sign.

use stevent::eventstudy::{compute_abnormal, run_battery, RowStatus};
use stevent::hdgm::{HdgmParams, Smoothness};
use stevent::model::{fit_model, normal_values, ModelOptions, NcModel};
use stevent::panel::split_windows_until;
use stevent::simgen::{simulate_panel, SimConfig, StationLayout};

fn main() -> stevent::Result<()> {
    let cfg = SimConfig {
        n_stations: 10,
        tau0: 250,
        tau1: 40,
        params: HdgmParams {
            beta: vec![30.0, 2.0],
            g: 0.6,
            nu: 2.0,
            theta: 30.0,
            sigma2_eps: 1.0,
            smoothness: Smoothness::Half,
        },
        layout: StationLayout::Square { side_km: 50.0 },
        n_covariates: 1,
        shift: -1.0,
        seed: 5,
    };
    let sim = simulate_panel(&cfg)?;
    let tl = sim.panel.timeline();
    let scenarios = [
        ("exact", tl[250], None),
        ("anticipated", tl[244], None),
        ("restricted", tl[255], Some(tl[285])),
    ];
    let mut values: Vec<(String, Vec<f64>)> = Vec::new();
    for (label, date, end) in scenarios {
        let split = split_windows_until(&sim.panel, date, end)?;
        let fit = fit_model(&sim.panel, &split, NcModel::Lm, &ModelOptions::default())?;
        let nc = normal_values(&sim.panel, &split, &fit)?;
        let abn = compute_abnormal(&sim.panel, &nc, &split)?;
        let report = run_battery(&abn, &[])?;
        for row in report.rows.iter().filter(|r| r.status == RowStatus::Ok) {
            match values.iter_mut().find(|(id, _)| *id == row.stat_id) {
                Some((_, v)) => v.push(row.value.unwrap()),
                None => values.push((row.stat_id.clone(), vec![row.value.unwrap()])),
            }
        }
        println!("{label:<12} tau0 = {:>3} tau1 = {:>2}", split.tau0(), split.tau1());
    }
    for (id, v) in &values {
        let same = v.iter().all(|x| x.signum() == v[0].signum());
        println!("{id:<18} {:>8.2?} {}", v, if same { "consistent" } else { "MIXED" });
    }
    Ok(())
}
