//! Reads a tiny panel from the three long-format CSV files, adds lagged
//! covariates and splits it at an event date.

use chrono::NaiveDate;
use stevent::panel::{ingest_csv, split_windows};

fn main() -> stevent::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let p = |name: &str| dir.path().join(name);
    std::fs::write(p("stations.csv"), "id,lon,lat,altitude\nMI01,9.19,45.46,120\nBG02,9.67,45.69,250\nBS03,10.21,45.54,150\n")
        .expect("write");
    let mut obs = String::from("station_id,timestamp,value\n");
    let mut covs = String::from("station_id,timestamp,name,value\n");
    let start = NaiveDate::from_ymd_opt(2020, 2, 1).unwrap();
    for (s, id) in ["MI01", "BG02", "BS03"].iter().enumerate() {
        for t in 0..40u64 {
            let d = start + chrono::Days::new(t);
            let temp = 5.0 + 0.2 * t as f64;
            let value = if s == 1 && t == 7 { "NA".to_string() } else { format!("{:.1}", 40.0 - temp + s as f64) };
            obs += &format!("{id},{d},{value}\n");
            covs += &format!("{id},{d},temp,{temp}\n");
        }
    }
    std::fs::write(p("obs.csv"), obs).expect("write");
    std::fs::write(p("covs.csv"), covs).expect("write");

    let panel = ingest_csv(p("stations.csv"), p("obs.csv"), p("covs.csv"))?
        .with_static_covariates(&["altitude".to_string()])?
        .add_lagged_covariates(&["temp".to_string()], &[1, 2])?
        .with_intercept();
    println!("{} stations x {} days", panel.n_stations(), panel.n_times());
    println!("covariates: {:?}", panel.covariate_names());
    println!("missing share per station: {:?}", panel.missing_rates());

    let split = split_windows(&panel, NaiveDate::from_ymd_opt(2020, 3, 1).unwrap())?;
    println!(
        "estimation window {:?} (tau0 = {}), event window {:?} (tau1 = {})",
        split.estimation(),
        split.tau0(),
        split.event(),
        split.tau1()
    );
    Ok(())
}
