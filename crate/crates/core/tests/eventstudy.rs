use chrono::NaiveDate;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use stevent::eventstudy::kernels::{bmp_adjust, corrado_statistics, patell_adjust};
use stevent::eventstudy::{
    compute_abnormal, corrado_family, grank_family, mean_ac_series, patell_family, run_battery, AbnormalOptions,
    AbnormalPanel, Family, Reference, RowStatus, StatRegistry, Tail, TestResult,
};
use stevent::panel::{Panel, Station, WindowSplit};
use stevent::Error;

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("s{i}")).collect()
}

fn normal_matrix(rng: &mut ChaCha8Rng, n: usize, tau: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, tau, |_, _| StandardNormal.sample(rng))
}

fn abnormal(ac: DMatrix<f64>, tau0: usize) -> AbnormalPanel {
    AbnormalPanel::from_matrix(ids(ac.nrows()), ac, tau0, &AbnormalOptions::default()).unwrap()
}

fn value(results: &[TestResult], id: &str) -> f64 {
    results.iter().find(|r| r.stat_id == id).unwrap().value
}

#[test]
fn perfect_model_gives_zero_abnormal_values() {
    let (n, tau) = (3, 60);
    let d0 = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    let y = DMatrix::from_fn(n, tau, |s, t| ((s * 13 + t * 7) % 17) as f64);
    let panel = Panel::new(
        (0..n).map(|i| Station::new(format!("s{i}"), i as f64, 0.0)).collect(),
        (0..tau).map(|t| d0 + chrono::Days::new(t as u64)).collect(),
        y.clone(),
        vec![],
        vec![],
    )
    .unwrap();
    let split = WindowSplit::new(5, 45, 60).unwrap();
    let nc = y.columns(5, 55).into_owned();
    let err = compute_abnormal(&panel, &nc, &split).unwrap_err();
    // zero ACs have zero spread, so every station is dropped
    assert!(matches!(err, Error::Data(_)));

    // perturb the estimation window only, so ACs have spread but the event
    // window stays perfectly explained
    let nc = nc + DMatrix::from_fn(n, 55, |s, t| if t < 40 { ((s + t) % 3) as f64 } else { 0.0 });
    let abn = compute_abnormal(&panel, &nc, &split).unwrap();
    assert!(abn.cac().iter().all(|&c| c == 0.0));
    assert!(abn.ac().columns(40, 15).iter().all(|&v| v == 0.0));
    assert_eq!(abn.dates().unwrap()[0], d0 + chrono::Days::new(5));
}

fn cumrank(ac: &DMatrix<f64>, tau0: usize) -> f64 {
    corrado_statistics(ac, tau0).unwrap().cumrank
}

#[test]
fn cumrank_minimum_by_enumeration() {
    // 5 stations, tau0 = 5, tau1 = 3; each station's three smallest values
    // sit in the event window
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ac = DMatrix::zeros(5, 8);
    for s in 0..5 {
        let mut v: Vec<f64> = (0..8).map(|_| StandardNormal.sample(&mut rng)).collect();
        v.sort_by(f64::total_cmp);
        let (low, high) = v.split_at(3);
        let mut order: Vec<f64> = high.to_vec();
        order.rotate_left(s % 5);
        order.extend(low.iter().rev());
        for t in 0..8 {
            ac[(s, t)] = order[t];
        }
    }
    let observed = cumrank(&ac, 5);

    // relabelling time points jointly keeps the denominator fixed, so the
    // event window holding every station's smallest values must win
    let mut perm: Vec<usize> = (0..8).collect();
    let mut min = f64::INFINITY;
    let mut count = 0;
    heap_permutations(&mut perm, 8, &mut |p| {
        let m = DMatrix::from_fn(5, 8, |s, t| ac[(s, p[t])]);
        min = min.min(cumrank(&m, 5));
        count += 1;
    });
    assert_eq!(count, 40320);
    assert!((observed - min).abs() < 1e-12, "observed {observed}, minimum {min}");

    // identical rank patterns: U = k/9 - 1/2, event ranks 1..3
    let u: Vec<f64> = (1..=8).map(|k| k as f64 / 9.0 - 0.5).collect();
    let s = (u.iter().map(|v| v * v).sum::<f64>() / 8.0).sqrt();
    let want = (u[0] + u[1] + u[2]) / (3f64.sqrt() * s);
    let same = DMatrix::from_fn(5, 8, |_, t| [7.0, 4.0, 8.0, 5.0, 6.0, 3.0, 1.0, 2.0][t]);
    assert!((cumrank(&same, 5) - want).abs() < 1e-12);
    assert!((want + 1.8898).abs() < 1e-4);
}

fn heap_permutations(a: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == 1 {
        f(a);
        return;
    }
    heap_permutations(a, k - 1, f);
    for i in 0..k - 1 {
        if k % 2 == 0 {
            a.swap(i, k - 1);
        } else {
            a.swap(0, k - 1);
        }
        heap_permutations(a, k - 1, f);
    }
}

fn rejection_rates(stats: &[&str], reps: u64, seed: u64, f: impl Fn(&AbnormalPanel) -> Vec<TestResult>) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = vec![0usize; stats.len()];
    for _ in 0..reps {
        let abn = abnormal(normal_matrix(&mut rng, 10, 110), 100);
        let res = f(&abn);
        for (h, id) in hits.iter_mut().zip(stats) {
            if res.iter().find(|r| r.stat_id == *id).unwrap().p_left < 0.05 {
                *h += 1;
            }
        }
    }
    hits.iter().map(|&h| h as f64 / reps as f64).collect()
}

#[test]
fn cumrank_size_on_iid_panels() {
    let rates = rejection_rates(&["CumRank"], 2000, 77, |a| corrado_family(a).unwrap());
    assert!((0.03..=0.07).contains(&rates[0]), "CumRank rejects {}", rates[0]);
}

#[test]
fn grank_size_on_iid_panels() {
    let ids = ["Z_grank", "Z_grank_adj", "T_grank"];
    let rates = rejection_rates(&ids, 2000, 78, |a| grank_family(a).unwrap());
    for (id, r) in ids.iter().zip(&rates) {
        assert!((0.03..=0.07).contains(r), "{id} rejects {r}");
    }
}

#[test]
fn single_station_mod_equals_plain() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ac = normal_matrix(&mut rng, 1, 60);
    ac[(0, 7)] = f64::NAN;
    ac[(0, 55)] = f64::NAN;
    let c = corrado_statistics(&ac, 50).unwrap();
    assert_eq!(c.cumrank_mod, c.cumrank);
}

#[test]
fn battery_under_null_is_quiet() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let reps = 200;
    let mut quiet = 0;
    for _ in 0..reps {
        let ac = normal_matrix(&mut rng, 10, 110) * 1e-6;
        let rep = run_battery(&abnormal(ac, 100), &[]).unwrap();
        let ok = rep
            .rows
            .iter()
            .filter(|r| r.status == RowStatus::Ok)
            .all(|r| r.value.unwrap().abs() < 3.0 && r.p_left.unwrap() >= 0.01);
        quiet += ok as usize;
    }
    let share = quiet as f64 / reps as f64;
    assert!(share >= 0.95, "quiet share {share}");
}

#[test]
fn battery_detects_two_sigma_drop() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let reps = 200;
    let registry = StatRegistry::default();
    let mut all_hits = 0;
    for _ in 0..reps {
        let mut ac = normal_matrix(&mut rng, 10, 110);
        for s in 0..10 {
            for t in 100..110 {
                ac[(s, t)] -= 2.0;
            }
        }
        let rep = registry.run(&abnormal(ac, 100), &[], Tail::Left).unwrap();
        let ok = rep
            .rows
            .iter()
            .filter(|r| r.status == RowStatus::Ok)
            .all(|r| r.value.unwrap() < 0.0 && r.p_left.unwrap() < 0.01);
        all_hits += ok as usize;
    }
    assert!(all_hits as f64 / reps as f64 >= 0.95, "{all_hits}/{reps}");
}

#[test]
fn report_layout() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let abn = abnormal(normal_matrix(&mut rng, 5, 60), 50);
    let rep = run_battery(&abn, &[]).unwrap();
    assert_eq!(rep.rows.len(), 18);
    let first_unadjusted = rep.rows.iter().position(|r| !r.cd_adjusted).unwrap();
    assert!(rep.rows[first_unadjusted..].iter().all(|r| !r.cd_adjusted));
    assert_eq!(rep.rows[0].stat_id, "P1");
    assert_eq!(rep.row("P1").unwrap().status, RowStatus::Unavailable);
    assert_eq!(rep.rows.iter().filter(|r| r.status == RowStatus::Ok).count(), 15);
    let csv = rep.to_csv().unwrap();
    assert!(csv.starts_with("stat_id,family,cd_adjusted,status,value,p_left"));
    assert!(csv.contains("P2,corrado,true,unavailable"));
    let json: serde_json::Value = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 18);
    for r in rep.rows.iter().filter(|r| r.status == RowStatus::Ok) {
        let p = r.p_left.unwrap();
        let want = match p {
            p if p < 0.01 => "***",
            p if p < 0.05 => "**",
            p if p < 0.10 => "*",
            _ => ".",
        };
        assert_eq!(r.stars, want);
    }
}

#[test]
fn unknown_statistic_lists_ids() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let abn = abnormal(normal_matrix(&mut rng, 4, 60), 50);
    match run_battery(&abn, &["Z_nope".to_string()]) {
        Err(Error::UnknownStatistic { available, .. }) => {
            assert_eq!(available.len(), 18);
            assert!(available.contains(&"CumRank_T".to_string()));
        }
        other => panic!("unexpected {other:?}"),
    }
    let rep = run_battery(&abn, &["p1".to_string(), "z_patell".to_string()]).unwrap();
    assert_eq!(rep.rows.len(), 2);
}

#[test]
fn custom_statistic_fills_slot() {
    let mut reg = StatRegistry::default();
    reg.register(
        "P1",
        Family::Corrado,
        true,
        "test kernel",
        std::sync::Arc::new(|a: &AbnormalPanel| Ok((a.r_bar(), Reference::StandardNormal))),
    )
    .unwrap();
    assert!(reg.register("CumRank", Family::Corrado, true, "x", std::sync::Arc::new(|_: &AbnormalPanel| Ok((0.0, Reference::StandardNormal)))).is_err());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let abn = abnormal(normal_matrix(&mut rng, 4, 60), 50);
    let rep = reg.run(&abn, &["P1".to_string()], Tail::TwoSided).unwrap();
    assert_eq!(rep.rows[0].value, Some(abn.r_bar()));
}

#[test]
fn missing_event_value_only_drops_parametric() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut ac = normal_matrix(&mut rng, 4, 60);
    ac[(2, 55)] = f64::NAN;
    let abn = abnormal(ac.clone(), 50);
    let ac3 = ac.remove_row(2);
    let three = AbnormalPanel::from_matrix(vec!["s0".into(), "s1".into(), "s3".into()], ac3, 50, &AbnormalOptions::default())
        .unwrap()
        .with_r_bar(abn.r_bar())
        .unwrap();
    let a = patell_family(&abn).unwrap();
    let b = patell_family(&three).unwrap();
    assert_eq!(value(&a, "Z_patell"), value(&b, "Z_patell"));
    assert_eq!(value(&a, "Z_patell_adj"), value(&b, "Z_patell_adj"));
    assert_ne!(
        value(&corrado_family(&abn).unwrap(), "CumRank"),
        value(&corrado_family(&three).unwrap(), "CumRank")
    );
}

#[test]
fn adjustment_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let abn = abnormal(normal_matrix(&mut rng, 6, 60), 50).with_r_bar(0.0).unwrap();
    let p = patell_family(&abn).unwrap();
    assert!((value(&p, "Z_patell_adj") - value(&p, "Z_patell")).abs() <= 1e-12);
    let b = stevent::eventstudy::bmp_family(&abn).unwrap();
    assert!((value(&b, "Z_BMP_adj") - value(&b, "Z_BMP")).abs() <= 1e-12);
    // the generalized-rank adjustment shares the Patell factor with r_bar_U
    assert_eq!(patell_adjust(-2.5, 6, 0.0).unwrap(), -2.5);
    assert_eq!(bmp_adjust(-2.5, 6, 0.0).unwrap(), -2.5);
}

#[test]
fn plot_series_marks_boundary() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let abn = abnormal(normal_matrix(&mut rng, 3, 60), 50);
    let pts = mean_ac_series(&abn);
    assert_eq!(pts.len(), 60);
    assert_eq!(pts.iter().filter(|p| p.boundary).count(), 1);
    assert!(pts[50].boundary && pts[50].window == "event" && pts[49].window == "estimation");
    let col: Vec<f64> = abn.ac().column(7).iter().copied().collect();
    let m = col.iter().sum::<f64>() / 3.0;
    let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 2.0).sqrt();
    let p = &pts[7];
    assert!((p.mean_ac.unwrap() - m).abs() < 1e-12);
    assert!((p.upper.unwrap() - (m + 1.96 * sd / 3f64.sqrt())).abs() < 1e-12);
    assert!((p.lower.unwrap() - (m - 1.96 * sd / 3f64.sqrt())).abs() < 1e-12);
}

fn ac_strategy() -> impl Strategy<Value = (DMatrix<f64>, Vec<f64>)> {
    (2usize..6).prop_flat_map(|n| {
        (
            prop::collection::vec(-5.0f64..5.0, n * 45),
            prop::collection::vec(0.1f64..20.0, n),
        )
            .prop_map(move |(v, c)| (DMatrix::from_row_slice(n, 45, &v), c))
    })
}

fn rank_values(abn: &AbnormalPanel) -> Vec<(String, f64)> {
    corrado_family(abn)
        .unwrap()
        .into_iter()
        .chain(grank_family(abn).unwrap())
        .map(|r| (r.stat_id, r.value))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rank_statistics_ignore_station_scale((ac, scale) in ac_strategy()) {
        let base = abnormal(ac.clone(), 35);
        let scaled = DMatrix::from_fn(ac.nrows(), ac.ncols(), |s, t| ac[(s, t)] * scale[s]);
        let other = abnormal(scaled, 35);
        prop_assert_eq!(rank_values(&base), rank_values(&other));
    }

    #[test]
    fn standardized_statistics_ignore_common_affine_map((ac, scale) in ac_strategy(), shift in -3.0f64..3.0) {
        let base = abnormal(ac.clone(), 35);
        let b = scale[0];
        let scaled = abnormal(ac.map(|v| v * b), 35);
        for (x, y) in patell_family(&base).unwrap().iter().zip(patell_family(&scaled).unwrap().iter()) {
            prop_assert!((x.value - y.value).abs() < 1e-9 * (1.0 + x.value.abs()));
        }
        let moved = abnormal(ac.map(|v| shift + v * b), 35);
        prop_assert_eq!(
            corrado_family(&base).unwrap().iter().map(|r| r.value).collect::<Vec<_>>(),
            corrado_family(&moved).unwrap().iter().map(|r| r.value).collect::<Vec<_>>()
        );
    }

    #[test]
    fn cac_is_additive_over_blocks((ac, _) in ac_strategy(), cut in 36usize..44) {
        let abn = abnormal(ac.clone(), 35);
        for s in 0..ac.nrows() {
            let a: f64 = (35..cut).map(|t| ac[(s, t)]).sum();
            let b: f64 = (cut..45).map(|t| ac[(s, t)]).sum();
            prop_assert!((abn.cac()[s] - (a + b)).abs() < 1e-12);
        }
    }

    #[test]
    fn patell_adj_shrinks_with_dependence((ac, _) in ac_strategy(), r1 in 0.01f64..0.98, dr in 0.001f64..0.01) {
        let abn = abnormal(ac, 35);
        let lo = value(&patell_family(&abn.clone().with_r_bar(r1).unwrap()).unwrap(), "Z_patell_adj");
        let hi = value(&patell_family(&abn.with_r_bar(r1 + dr).unwrap()).unwrap(), "Z_patell_adj");
        prop_assume!(lo != 0.0);
        prop_assert!(hi.abs() < lo.abs());
    }

    #[test]
    fn normal_p_values_are_symmetric(x in -8.0f64..8.0) {
        let a = TestResult::new("z", x, Family::Patell, false, Reference::StandardNormal);
        let b = TestResult::new("z", -x, Family::Patell, false, Reference::StandardNormal);
        prop_assert!((0.0..=1.0).contains(&a.p_left));
        prop_assert!((a.p_left - (1.0 - b.p_left)).abs() < 1e-12);
    }
}
