use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::families::run_family;
use super::registry::{Family, Kernel, StatRegistry, Tail, TestResult};
use super::AbnormalPanel;
use crate::error::Result;

/// Row order of the report inside the adjusted and unadjusted groups.
const REPORT_ORDER: [&str; 18] = [
    "P1",
    "P2",
    "Corrado_Tukey_adj",
    "Z_patell_adj",
    "Z_BMP_adj",
    "T_grank",
    "Z_grank_adj",
    "CumRank",
    "CumRank_mod",
    "CumRank_T",
    "CumRank_Z_adj",
    "cross_T_test",
    "crude_dep_T_test",
    "T_skew",
    "Z_patell",
    "CumRank_Z",
    "Z_grank",
    "Z_BMP",
];

/// `***`, `**`, `*` at 1%, 5%, 10%; `.` otherwise.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.10 {
        "*"
    } else {
        "."
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    Unavailable,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryRow {
    pub stat_id: String,
    pub family: Family,
    pub cd_adjusted: bool,
    pub status: RowStatus,
    pub value: Option<f64>,
    pub p_left: Option<f64>,
    pub p_value: Option<f64>,
    pub stars: String,
    pub reference: Option<String>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub tail: Tail,
    pub rows: Vec<BatteryRow>,
}

impl BatteryReport {
    pub fn row(&self, stat_id: &str) -> Option<&BatteryRow> {
        self.rows.iter().find(|r| r.stat_id == stat_id)
    }

    /// Value of a computed statistic.
    pub fn value(&self, stat_id: &str) -> Option<f64> {
        self.row(stat_id).and_then(|r| r.value)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "stat_id",
            "family",
            "cd_adjusted",
            "status",
            "value",
            "p_left",
            "p_value",
            "stars",
            "reference",
            "message",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.stat_id.clone(),
                r.family.to_string(),
                r.cd_adjusted.to_string(),
                serde_json::to_value(r.status)?.as_str().unwrap_or_default().to_string(),
                opt(r.value),
                opt(r.p_left),
                opt(r.p_value),
                r.stars.clone(),
                r.reference.clone().unwrap_or_default(),
                r.message.clone().unwrap_or_default(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Fixed-width console table.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<18} {:<5} {:>12} {:>10}  {}\n", "statistic", "CD", "value", "p", "");
        for r in &self.rows {
            let cd = if r.cd_adjusted { "Adj" } else { "Unadj" };
            match (r.status, r.value, r.p_value) {
                (RowStatus::Ok, Some(v), Some(p)) => {
                    out += &format!("{:<18} {:<5} {:>12.4} {:>10.4}  {}\n", r.stat_id, cd, v, p, r.stars)
                }
                _ => {
                    let why = r.message.as_deref().unwrap_or("unavailable");
                    out += &format!("{:<18} {:<5} {:>12} {:>10}  {}\n", r.stat_id, cd, "-", "-", why)
                }
            }
        }
        out
    }
}

impl StatRegistry {
    /// Evaluates the requested statistics (all registered ones when
    /// `stats` is empty); unknown ids fail before anything is computed.
    pub fn run(&self, abn: &AbnormalPanel, stats: &[String], tail: Tail) -> Result<BatteryReport> {
        let entries = if stats.is_empty() {
            self.entries().iter().collect::<Vec<_>>()
        } else {
            stats.iter().map(|id| self.resolve(id)).collect::<Result<Vec<_>>>()?
        };
        let mut families: HashMap<Family, std::result::Result<Vec<TestResult>, String>> = HashMap::new();
        let mut rows = Vec::with_capacity(entries.len());
        for e in entries {
            let outcome: std::result::Result<Option<TestResult>, String> = match &e.kernel {
                Kernel::Unavailable => Ok(None),
                Kernel::Builtin => {
                    let fam = families
                        .entry(e.family)
                        .or_insert_with(|| run_family(e.family, abn).map_err(|err| err.to_string()));
                    fam.clone().map(|v| v.into_iter().find(|r| r.stat_id == e.id))
                }
                Kernel::Custom(k) => k(abn)
                    .map(|(value, reference)| Some(TestResult::new(&e.id, value, e.family, e.cd_adjusted, reference)))
                    .map_err(|err| err.to_string()),
            };
            let mut row = BatteryRow {
                stat_id: e.id.clone(),
                family: e.family,
                cd_adjusted: e.cd_adjusted,
                status: RowStatus::Unavailable,
                value: None,
                p_left: None,
                p_value: None,
                stars: String::new(),
                reference: None,
                message: None,
            };
            match outcome {
                Ok(Some(r)) => {
                    let p = r.p_value(tail);
                    row.status = RowStatus::Ok;
                    row.value = Some(r.value);
                    row.p_left = Some(r.p_left);
                    row.p_value = Some(p);
                    row.stars = stars(p).to_string();
                    row.reference = Some(r.reference.to_string());
                }
                Ok(None) => row.message = Some("unavailable".into()),
                Err(msg) => {
                    log::warn!("statistic {} failed: {msg}", e.id);
                    row.status = RowStatus::Error;
                    row.message = Some(msg);
                }
            }
            rows.push(row);
        }
        let rank = |id: &str| REPORT_ORDER.iter().position(|&o| o == id).unwrap_or(REPORT_ORDER.len());
        rows.sort_by_key(|r| (!r.cd_adjusted, rank(&r.stat_id)));
        Ok(BatteryReport { tail, rows })
    }
}

/// Battery with the built-in registry and left-tail p-values.
pub fn run_battery(abn: &AbnormalPanel, stats: &[String]) -> Result<BatteryReport> {
    StatRegistry::default().run(abn, stats, Tail::Left)
}

/// One day of the cross-station mean AC series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanAcPoint {
    /// Offset from the start of the estimation window.
    pub index: usize,
    pub date: Option<chrono::NaiveDate>,
    pub mean_ac: Option<f64>,
    /// `mean_ac ∓ 1.96·sd/√n` over the stations observed that day.
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub n_stations: usize,
    pub window: String,
    /// Marks the first event-window day.
    pub boundary: bool,
}

pub fn mean_ac_series(abn: &AbnormalPanel) -> Vec<MeanAcPoint> {
    let tau0 = abn.tau0();
    (0..abn.ac().ncols())
        .map(|t| {
            let col: Vec<f64> = abn.ac().column(t).iter().copied().filter(|v| !v.is_nan()).collect();
            let n = col.len() as f64;
            let mean = (!col.is_empty()).then(|| col.iter().sum::<f64>() / n);
            let half = mean.filter(|_| col.len() > 1).map(|m| {
                let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
                1.96 * (var / n).sqrt()
            });
            MeanAcPoint {
                index: t,
                date: abn.dates().map(|d| d[t]),
                mean_ac: mean,
                lower: mean.zip(half).map(|(m, h)| m - h),
                upper: mean.zip(half).map(|(m, h)| m + h),
                n_stations: col.len(),
                window: if t < tau0 { "estimation" } else { "event" }.to_string(),
                boundary: t == tau0,
            }
        })
        .collect()
}

pub fn mean_ac_csv(abn: &AbnormalPanel) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in mean_ac_series(abn) {
        w.serialize(p)?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}
