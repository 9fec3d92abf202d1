//! Matérn correlations, the exact Kalman likelihood and smoothed states on
//! a simulated panel.

use stevent::hdgm::{forecast_normal, kalman_loglik, kalman_smooth, matern_correlation, Smoothness};
use stevent::simgen::{simulate_panel, SimConfig, StationLayout};

fn main() -> stevent::Result<()> {
    for sm in [Smoothness::Half, Smoothness::ThreeHalves, Smoothness::FiveHalves] {
        let row: Vec<String> = [0.0, 5.0, 20.0, 50.0]
            .iter()
            .map(|&d| format!("{:.3}", matern_correlation(d, 20.0, sm).unwrap()))
            .collect();
        println!("smoothness {:>3}: rho(0, 5, 20, 50 km) = {}", f64::from(sm), row.join(", "));
    }

    let cfg = SimConfig {
        n_stations: 6,
        tau0: 100,
        tau1: 10,
        params: stevent::hdgm::HdgmParams {
            beta: vec![20.0, 2.0],
            g: 0.7,
            nu: 1.5,
            theta: 20.0,
            sigma2_eps: 0.5,
            smoothness: Smoothness::Half,
        },
        layout: StationLayout::Square { side_km: 40.0 },
        n_covariates: 1,
        shift: 0.0,
        seed: 1,
    };
    let sim = simulate_panel(&cfg)?;
    let truth = &sim.params;
    println!("loglik at the true parameters: {:.3}", kalman_loglik(&sim.panel, &sim.split, truth)?);
    let wrong = stevent::hdgm::HdgmParams { g: 0.0, ..truth.clone() };
    println!("loglik with g = 0:             {:.3}", kalman_loglik(&sim.panel, &sim.split, &wrong)?);

    let sm = kalman_smooth(&sim.panel, &sim.split, truth)?;
    let err: f64 = (0..cfg.tau0)
        .map(|t| (sm.means[(0, t)] - sim.latent[(0, t)]).powi(2))
        .sum::<f64>()
        / cfg.tau0 as f64;
    println!("station 1: smoothed-state RMSE {:.3} vs latent sd {:.3}", err.sqrt(), truth.marginal_sd());

    let fc = forecast_normal(&sim.panel, &sim.split, truth)?;
    println!("station 1 forecasts: {:.2?}", fc.row(0).iter().take(5).collect::<Vec<_>>());
    Ok(())
}
