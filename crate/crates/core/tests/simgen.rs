use stevent::eventstudy::compute_abnormal;
use stevent::hdgm::{HdgmParams, Smoothness};
use stevent::model::{fit_model, normal_values, ModelOptions, NcModel};
use stevent::simgen::{run_monte_carlo, simulate_replication, McConfig, McScenario, SimConfig, StationLayout};

fn config(nu: f64, theta: f64, g: f64) -> SimConfig {
    SimConfig {
        n_stations: 10,
        tau0: 200,
        tau1: 20,
        params: HdgmParams {
            beta: vec![2.0, 0.5, -0.3],
            g,
            nu,
            theta,
            sigma2_eps: 1.0,
            smoothness: Smoothness::Half,
        },
        layout: StationLayout::Square { side_km: 50.0 },
        n_covariates: 2,
        shift: 0.0,
        seed: 17,
    }
}

fn lm_r_bar(cfg: &SimConfig, r: u64) -> f64 {
    let sim = simulate_replication(cfg, r).unwrap();
    let fit = fit_model(&sim.panel, &sim.split, NcModel::Lm, &ModelOptions::default()).unwrap();
    let nc = normal_values(&sim.panel, &sim.split, &fit).unwrap();
    compute_abnormal(&sim.panel, &nc, &sim.split).unwrap().r_bar()
}

#[test]
fn replications_are_reproducible() {
    let cfg = config(1.0, 30.0, 0.5);
    let a = simulate_replication(&cfg, 3).unwrap();
    let b = simulate_replication(&cfg, 3).unwrap();
    let c = simulate_replication(&cfg, 4).unwrap();
    assert_eq!(a.panel.observations(), b.panel.observations());
    assert_eq!(a.latent, b.latent);
    assert_ne!(a.panel.observations(), c.panel.observations());
}

#[test]
fn shift_moves_only_the_event_window() {
    let base = config(1.0, 30.0, 0.5);
    let shifted = SimConfig { shift: -1.5, ..base.clone() };
    let a = simulate_replication(&base, 2).unwrap();
    let b = simulate_replication(&shifted, 2).unwrap();
    let size = -1.5 * (1.0f64 / 0.75 + 1.0).sqrt();
    assert!((b.shift_size - size).abs() < 1e-12);
    let d = b.panel.observations() - a.panel.observations();
    for t in 0..220 {
        let want = if t >= 200 { size } else { 0.0 };
        for s in 0..10 {
            assert!((d[(s, t)] - want).abs() < 1e-12);
        }
    }
}

#[test]
fn latent_field_has_stationary_variance() {
    let cfg = SimConfig { tau0: 3000, ..config(2.0, 5.0, 0.6) };
    let sim = simulate_replication(&cfg, 0).unwrap();
    let w = &sim.latent;
    let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
    let want = 2.0 / (1.0 - 0.36);
    assert!((var / want - 1.0).abs() < 0.15, "{var} vs {want}");
    let lag1 = (0..10)
        .flat_map(|s| (1..w.ncols()).map(move |t| (s, t)))
        .map(|(s, t)| w[(s, t)] * w[(s, t - 1)])
        .sum::<f64>()
        / (10 * (w.ncols() - 1)) as f64;
    assert!((lag1 / var - 0.6).abs() < 0.05);
}

#[test]
fn zero_nu_gives_independent_stations() {
    let cfg = SimConfig { tau0: 480, ..config(0.0, 30.0, 0.0) };
    let sim = simulate_replication(&cfg, 0).unwrap();
    assert_eq!(sim.latent.amax(), 0.0);
    let mean: f64 = (0..10).map(|r| lm_r_bar(&cfg, r)).sum::<f64>() / 10.0;
    assert!(mean.abs() < 0.05, "{mean}");
}

#[test]
fn long_range_gives_strong_correlation() {
    let cfg = config(20.0, 5000.0, 0.0);
    let r = lm_r_bar(&cfg, 0);
    assert!(r > 0.8, "{r}");
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(SimConfig { tau1: 0, ..config(1.0, 5.0, 0.0) }.validate().is_err());
    assert!(config(1.0, 5.0, 1.0).validate().is_err());
    assert!(config(-1.0, 5.0, 0.0).validate().is_err());
    let mut c = config(1.0, 5.0, 0.0);
    c.params.beta.pop();
    assert!(c.validate().is_err());
    let c = SimConfig {
        layout: StationLayout::Explicit { coords: vec![(0.0, 0.0)] },
        ..config(1.0, 5.0, 0.0)
    };
    assert!(c.validate().is_err());
}

fn mc(reps: usize) -> McConfig {
    McConfig {
        base: config(0.0, 30.0, 0.0),
        scenarios: vec![
            McScenario { label: "independent".into(), ..Default::default() },
            McScenario { label: "dependent".into(), nu: Some(1.0), theta: Some(1000.0), ..Default::default() },
        ],
        shifts: vec![0.0, -1.0],
        models: vec![NcModel::Lm],
        replications: reps,
        stats: vec!["Z_BMP".into(), "Z_BMP_adj".into(), "CumRank".into()],
        abnormal: Default::default(),
        model_options: Default::default(),
        tail: Default::default(),
    }
}

#[test]
fn monte_carlo_grid_and_determinism() {
    let cfg = mc(60);
    let a = run_monte_carlo(&cfg).unwrap();
    assert_eq!(a.rows.len(), 2 * 2 * 3);
    assert_eq!(a, run_monte_carlo(&cfg).unwrap());
    for r in &a.rows {
        assert!(r.valid && r.failures == 0 && r.n == 60);
        assert!(r.rate_01 <= r.rate_05 && r.rate_05 <= r.rate_10);
        assert!((r.se_05 - (r.rate_05 * (1.0 - r.rate_05) / 60.0).sqrt()).abs() < 1e-15);
    }
    for sc in ["independent", "dependent"] {
        for id in ["Z_BMP", "Z_BMP_adj", "CumRank"] {
            let size = a.row(sc, 0.0, NcModel::Lm, id).unwrap().rate_05;
            let power = a.row(sc, -1.0, NcModel::Lm, id).unwrap().rate_05;
            assert!(power >= size, "{sc} {id}: {power} < {size}");
        }
    }
    // positive dependence inflates the unadjusted size, the adjustment restores it
    let dep = |id| a.row("dependent", 0.0, NcModel::Lm, id).unwrap();
    assert!(dep("Z_BMP").mean_r_bar > 0.2);
    assert!(dep("Z_BMP").rate_05 > dep("Z_BMP_adj").rate_05);
    let csv = a.to_csv().unwrap();
    assert!(csv.starts_with("scenario,shift,model,stat_id,replications,failures"));
    assert_eq!(csv.lines().count(), 13);
}

#[test]
fn monte_carlo_rejects_unknown_statistic() {
    let mut cfg = mc(1);
    cfg.stats = vec!["nope".into()];
    assert!(matches!(run_monte_carlo(&cfg), Err(stevent::Error::UnknownStatistic { .. })));
}

#[test]
fn null_segments_have_equal_means() {
    let cfg = SimConfig { tau0: 2000, tau1: 2000, ..config(1.0, 30.0, 0.3) };
    let sim = simulate_replication(&cfg, 0).unwrap();
    let y = sim.panel.observations();
    let seg = |r: std::ops::Range<usize>| {
        let n = (r.len() * 10) as f64;
        (0..10).flat_map(|s| r.clone().map(move |t| (s, t))).map(|(s, t)| y[(s, t)]).sum::<f64>() / n
    };
    // the latent field is common to all stations, so the segment means vary
    // with roughly its long-run sd
    assert!((seg(0..2000) - seg(2000..4000)).abs() < 0.25);
}

#[test]
fn negative_dependence_undersizes_unadjusted_statistics() {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    use stevent::eventstudy::{run_battery, AbnormalOptions, AbnormalPanel};

    let ids: Vec<String> = (0..10).map(|s| format!("s{s}")).collect();
    let stats = vec!["Z_patell".to_string(), "Z_patell_adj".to_string()];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let (mut raw, mut adj, mut r_bar) = (0, 0, 0.0);
    let reps = 400;
    for _ in 0..reps {
        let factor: Vec<f64> = (0..120).map(|_| StandardNormal.sample(&mut rng)).collect();
        let ac = nalgebra::DMatrix::from_fn(10, 120, |s, t| {
            let sign = if s < 5 { 1.0 } else { -1.0 };
            let e: f64 = StandardNormal.sample(&mut rng);
            sign * 2.0 * factor[t] + e
        });
        let abn = AbnormalPanel::from_matrix(ids.clone(), ac, 100, &AbnormalOptions::default()).unwrap();
        r_bar += abn.r_bar() / reps as f64;
        let rep = run_battery(&abn, &stats).unwrap();
        let p = |id: &str| rep.row(id).unwrap().p_value.unwrap();
        raw += (p("Z_patell") < 0.05) as usize;
        adj += (p("Z_patell_adj") < 0.05) as usize;
    }
    assert!(r_bar < -0.05, "{r_bar}");
    assert!(raw <= adj, "{raw} > {adj}");
    assert!((raw as f64) < 0.02 * reps as f64, "{raw}");
}
