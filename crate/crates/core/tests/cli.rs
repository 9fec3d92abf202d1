mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use stevent::hdgm::{HdgmParams, Smoothness};
use stevent::simgen::{simulate_panel, SimConfig, StationLayout};

fn sim(n: usize, tau0: usize, tau1: usize, shift: f64) -> stevent::simgen::SimulatedPanel {
    simulate_panel(&SimConfig {
        n_stations: n,
        tau0,
        tau1,
        params: HdgmParams {
            beta: vec![10.0, 1.5],
            g: 0.6,
            nu: 1.0,
            theta: 20.0,
            sigma2_eps: 0.5,
            smoothness: Smoothness::Half,
        },
        layout: StationLayout::Square { side_km: 40.0 },
        n_covariates: 1,
        shift,
        seed: 11,
    })
    .unwrap()
}

/// Writes data files and a config into `dir`; `extra` is appended verbatim.
fn setup(dir: &Path, n: usize, tau0: usize, tau1: usize, shift: f64, extra: &str) -> PathBuf {
    let s = sim(n, tau0, tau1, shift);
    common::write_panel_csv(&s.panel, dir);
    let event = s.panel.timeline()[tau0];
    let cfg = format!(
        "out = \"{}\"\nmodels = [\"lm\"]\n\n[data]\nstations = \"stations.csv\"\nobservations = \"obs.csv\"\ncovariates = \"covs.csv\"\n\n[event]\ndate = \"{event}\"\n{extra}",
        dir.join("out").display()
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, cfg).unwrap();
    path
}

fn stevent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stevent"))
        .args(args)
        .args(["--log-level", "warn"])
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn lm_fit_on_two_station_toy_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), 2, 50, 10, 0.0, "");
    let o = stevent(&["fit", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    assert!(out.join("fits/main/lm.json").exists());
    let summary = std::fs::read_to_string(out.join("fits/main/lm.csv")).unwrap();
    assert!(summary.starts_with("station_id,model_kind,p_ar,q_ma,aicc,residual_variance"));
    assert_eq!(summary.lines().count(), 3);
    // the config is copied next to the outputs and reproduces the run
    let copied = out.join("config.toml");
    let o2 = stevent(&["fit", "--config", copied.to_str().unwrap()]);
    assert_eq!(code(&o2), 0);
}

#[test]
fn three_scenarios_by_four_models() {
    let dir = tempfile::tempdir().unwrap();
    let s = sim(3, 100, 30, 0.0);
    let tl = s.panel.timeline();
    let extra = format!(
        "label = \"exact\"\n[[event.scenarios]]\nlabel = \"anticipated\"\ndate = \"{}\"\n[[event.scenarios]]\nlabel = \"restricted\"\ndate = \"{}\"\nend = \"{}\"\n",
        tl[95], tl[105], tl[125]
    );
    let cfg = setup(dir.path(), 3, 100, 30, -3.0, &extra);
    let c = cfg.to_str().unwrap();
    let o = stevent(&["fit", "--config", c, "--model", "all"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let fits = dir.path().join("out/fits");
    let n_artifacts = walk(&fits).iter().filter(|p| p.extension().is_some_and(|e| e == "json")).count();
    assert_eq!(n_artifacts, 12);
    assert!(std::fs::read_to_string(fits.join("fit_status.csv")).unwrap().lines().count() == 13);

    let o = stevent(&["evstudy", "--config", c, "--model", "all", "--from-fits", fits.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let ev = dir.path().join("out/evstudy");
    for sc in ["exact", "anticipated", "restricted"] {
        assert!(ev.join(sc).join("diagnostics.csv").exists());
        for m in ["HDGM", "regARMA", "regAR1", "lm"] {
            assert!(ev.join(sc).join(m).join("battery.json").exists());
        }
    }
    let signs = std::fs::read_to_string(ev.join("sign_consistency.csv")).unwrap();
    assert!(signs.starts_with("model,stat_id,values,consistent"));
    assert!(signs.contains("exact="));
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn large_drop_gives_negative_significant_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), 6, 120, 20, -4.0, "");
    let o = stevent(&["evstudy", "--config", cfg.to_str().unwrap(), "--model", "hdgm,lm"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for m in ["HDGM", "lm"] {
        let path = dir.path().join("out/evstudy/main").join(m).join("battery.json");
        let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        for row in rep["rows"].as_array().unwrap() {
            if row["status"] == "ok" {
                assert!(row["value"].as_f64().unwrap() < 0.0, "{m} {}", row["stat_id"]);
            }
        }
        let z = rep["rows"].as_array().unwrap().iter().find(|r| r["stat_id"] == "Z_patell").unwrap();
        assert!(z["p_value"].as_f64().unwrap() < 0.01);
        let plot = std::fs::read_to_string(dir.path().join("out/evstudy/main").join(m).join("plot.csv")).unwrap();
        assert!(plot.starts_with("index,date,mean_ac,lower,upper,n_stations,window,boundary"));
    }
}

#[test]
fn extension_slot_reports_unavailable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), 4, 60, 10, 0.0, "");
    let o = stevent(&["evstudy", "--config", cfg.to_str().unwrap(), "--stats", "Z_patell,P1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/evstudy/main/lm/battery.csv")).unwrap();
    let p1 = csv.lines().find(|l| l.starts_with("P1,")).unwrap();
    assert!(p1.contains(",unavailable,"), "{p1}");
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn error_classes_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), 2, 50, 10, 0.0, "");
    let c = cfg.to_str().unwrap();

    let o = stevent(&["evstudy", "--config", c, "--stats", "Z_nope"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Z_patell_adj"));

    let blocker = dir.path().join("blocker");
    std::fs::write(&blocker, "").unwrap();
    let o = stevent(&["fit", "--config", c, "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(code(&o), 5, "{}", String::from_utf8_lossy(&o.stderr));

    let o = stevent(&["evstudy", "--config", c, "--from-fits", dir.path().join("nowhere").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("stevent fit"));

    let o = stevent(&["fit", "--config", c, "--event-date", "2031-01-01"]);
    assert_eq!(code(&o), 3);

    std::fs::write(
        dir.path().join("obs.csv"),
        "station_id,timestamp,value\nS9,2020-01-01,1.0\n",
    )
    .unwrap();
    let o = stevent(&["ingest-check", "--config", c]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("S9"));
}

#[test]
fn ingest_check_reports_windows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), 3, 40, 8, 0.0, "");
    let o = stevent(&["ingest-check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/ingest_summary.json")).unwrap()).unwrap();
    assert_eq!(s["n_stations"], 3);
    assert_eq!(s["n_times"], 48);
    assert_eq!(s["windows"][0]["tau0"], 40);
    assert_eq!(s["windows"][0]["tau1"], 8);
    assert_eq!(s["covariates"][0], "intercept");
}

#[test]
fn diagnostics_command_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), 4, 80, 10, 0.0, "");
    let o = stevent(&["diagnostics", "--config", cfg.to_str().unwrap(), "--model", "lm,regar1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let t = std::fs::read_to_string(dir.path().join("out/diagnostics/main/diagnostics.csv")).unwrap();
    assert!(t.starts_with("statistic,lm,regAR1"), "{t}");
    assert_eq!(t.lines().count(), 12);
}

const SMALL_MC: &str = r#"
[mc]
shifts = [0.0, -1.0]
models = ["lm"]
replications = 25
stats = ["Z_BMP_adj", "CumRank"]

[mc.base]
n_stations = 5
tau0 = 60
tau1 = 5
n_covariates = 1
seed = 3

[mc.base.params]
beta = [1.0, 0.5]
g = 0.0
nu = 0.5
theta = 100.0
sigma2_eps = 1.0

[mc.base.layout]
kind = "square"
side_km = 20.0

[[mc.scenarios]]
label = "base"
"#;

#[test]
fn monte_carlo_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("mc.toml");
    std::fs::write(&cfg, SMALL_MC).unwrap();
    let run = |out: &str| {
        let o = stevent(&["mc", "--config", cfg.to_str().unwrap(), "--out", dir.path().join(out).to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(dir.path().join(out).join("mc_report.csv")).unwrap()
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    assert_eq!(a.lines().count(), 5);
    assert!(dir.path().join("a/mc_report.json").exists());
    assert!(dir.path().join("a/config.toml").exists());

    let o = stevent(&["mc", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("c").to_str().unwrap(), "--seed", "4"]);
    assert_eq!(code(&o), 0);
    assert_ne!(a, std::fs::read_to_string(dir.path().join("c/mc_report.csv")).unwrap());
}

#[test]
fn invalid_grid_fails_before_computation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("mc.toml");
    std::fs::write(&cfg, SMALL_MC.replace("tau1 = 5", "tau1 = 0")).unwrap();
    let out = dir.path().join("out");
    let o = stevent(&["mc", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}
