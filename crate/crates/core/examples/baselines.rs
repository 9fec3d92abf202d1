//! Per-station temporal baselines: lm, regAR1 and regARMA with AICc order
//! selection, on a series with AR(2) errors.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use stevent::baselines::{fit_lm, fit_reg_ar1, forecast_baseline, select_order_aicc};

fn main() -> stevent::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let n = 300;
    let mut z = || -> f64 { StandardNormal.sample(&mut rng) };
    let x = DMatrix::from_fn(n, 2, |_, c| if c == 0 { 1.0 } else { z() });
    let mut u = vec![0.0; n + 100];
    for t in 2..u.len() {
        u[t] = 0.6 * u[t - 1] - 0.3 * u[t - 2] + z();
    }
    let y: Vec<f64> = (0..n).map(|t| 3.0 + 0.8 * x[(t, 1)] + u[t + 100]).collect();
    let names = vec!["intercept".to_string(), "x".to_string()];

    let lm = fit_lm("S1", &y, &x, &names)?;
    let ar1 = fit_reg_ar1("S1", &y, &x, &names)?;
    let sel = select_order_aicc("S1", &y, &x, &names)?;
    for f in [&lm, &ar1, &sel.fit] {
        println!(
            "{:<8} order ({}, {}) aicc {:>9.2} beta {:.3?}",
            f.kind.as_str(),
            f.order.p_ar,
            f.order.q_ma,
            f.aicc,
            f.coefficients
        );
    }
    let mut grid: Vec<_> = sel.grid.iter().filter_map(|c| c.aicc.map(|a| (a, c.order))).collect();
    grid.sort_by(|a, b| a.0.total_cmp(&b.0));
    println!("best five cells:");
    for (a, o) in grid.iter().take(5) {
        println!("  ({}, {}) {a:.2}", o.p_ar, o.q_ma);
    }

    let x_event = DMatrix::from_fn(5, 2, |_, c| if c == 0 { 1.0 } else { 0.0 });
    println!("regARMA forecast at x = 0: {:.3?}", forecast_baseline(&sel.fit, &x_event)?);
    Ok(())
}
