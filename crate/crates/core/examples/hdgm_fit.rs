//! EM fit of the HDGM on a simulated panel, compared with the truth.

use stevent::hdgm::{em_fit, initial_params, EmOptions, HdgmParams, Smoothness};
use stevent::simgen::{simulate_panel, SimConfig, StationLayout};

fn main() -> stevent::Result<()> {
    let truth = HdgmParams {
        beta: vec![5.0, 1.0],
        g: 0.8,
        nu: 2.0,
        theta: 30.0,
        sigma2_eps: 1.0,
        smoothness: Smoothness::Half,
    };
    let cfg = SimConfig {
        n_stations: 20,
        tau0: 400,
        tau1: 10,
        params: truth.clone(),
        layout: StationLayout::Square { side_km: 100.0 },
        n_covariates: 1,
        shift: 0.0,
        seed: 7,
    };
    let sim = simulate_panel(&cfg)?;
    let init = initial_params(&sim.panel, &sim.split, Smoothness::Half)?;
    let fit = em_fit(&sim.panel, &sim.split, &init, &EmOptions::default())?;
    let p = &fit.params;
    println!("converged: {} after {} iterations", fit.converged, fit.iterations);
    println!("{:>10} {:>8} {:>8}", "", "truth", "fit");
    for (name, a, b) in [
        ("g", truth.g, p.g),
        ("nu", truth.nu, p.nu),
        ("theta", truth.theta, p.theta),
        ("sigma2", truth.sigma2_eps, p.sigma2_eps),
        ("beta0", truth.beta[0], p.beta[0]),
        ("beta1", truth.beta[1], p.beta[1]),
    ] {
        println!("{name:>10} {a:>8.3} {b:>8.3}");
    }
    let trace = &fit.loglik_trace;
    println!("loglik {:.2} -> {:.2}", trace[0], fit.loglik());
    println!("{}", serde_json::to_string_pretty(&fit.summary())?);
    Ok(())
}
