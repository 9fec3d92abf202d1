//! Declarative run configuration, read from TOML.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::diagnostics::HampelOptions;
use crate::error::{Error, Result};
use crate::eventstudy::{AbnormalOptions, StatRegistry, Tail};
use crate::hdgm::{EmOptions, HdgmParams, Smoothness};
use crate::model::{ModelOptions, NcModel};
use crate::panel::{ingest_csv, Panel};
use crate::simgen::{McConfig, McScenario, SimConfig, StationLayout};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// `hdgm`, `lm`, `regar1`, `regarma` or `all`.
    #[serde(default = "default_models")]
    pub models: Vec<String>,
    /// Statistic ids; empty runs every implemented one.
    #[serde(default)]
    pub stats: Vec<String>,
    #[serde(default)]
    pub tail: Tail,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<EventConfig>,
    #[serde(default)]
    pub options: NumericOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McConfig>,
}

fn default_version() -> u32 {
    CONFIG_VERSION
}

fn default_out() -> PathBuf {
    PathBuf::from("stevent-out")
}

fn default_models() -> Vec<String> {
    vec!["all".into()]
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            out: default_out(),
            seed: 0,
            threads: None,
            models: default_models(),
            stats: Vec::new(),
            tail: Tail::Left,
            data: None,
            event: None,
            options: NumericOptions::default(),
            mc: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub stations: PathBuf,
    pub observations: PathBuf,
    pub covariates: PathBuf,
    /// Prepend a constant `intercept` covariate.
    #[serde(default = "yes")]
    pub intercept: bool,
    /// Columns of the stations file used as time-constant covariates.
    #[serde(default)]
    pub static_covariates: Vec<String>,
    /// Covariates to lag by each of `lags` days.
    #[serde(default)]
    pub lagged: Vec<String>,
    #[serde(default)]
    pub lags: Vec<usize>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventConfig {
    /// Main event date; may be omitted when `scenarios` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<NaiveDate>,
    /// Last event-window day; the end of the data when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<NaiveDate>,
    #[serde(default = "main_label")]
    pub label: String,
    /// Alternative event windows for sensitivity runs.
    #[serde(default)]
    pub scenarios: Vec<EventScenario>,
}

fn main_label() -> String {
    "main".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventScenario {
    pub label: String,
    pub date: NaiveDate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericOptions {
    pub smoothness: Smoothness,
    pub em: EmOptions,
    pub abnormal: AbnormalOptions,
    pub hampel: HampelOptions,
}

impl Default for NumericOptions {
    fn default() -> Self {
        NumericOptions {
            smoothness: Smoothness::Half,
            em: EmOptions::default(),
            abnormal: AbnormalOptions::default(),
            hampel: HampelOptions::default(),
        }
    }
}

impl NumericOptions {
    pub fn model_options(&self) -> ModelOptions {
        ModelOptions {
            smoothness: self.smoothness,
            em: self.em,
        }
    }
}

impl RunConfig {
    /// Reads a config file; relative data paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(d) = &mut cfg.data {
            for p in [&mut d.stations, &mut d.observations, &mut d.covariates] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn model_list(&self) -> Result<Vec<NcModel>> {
        let mut out = Vec::new();
        for m in &self.models {
            for k in NcModel::parse_list(m)? {
                if !out.contains(&k) {
                    out.push(k);
                }
            }
        }
        if out.is_empty() {
            return Err(Error::Config("no models selected".into()));
        }
        Ok(out)
    }

    /// Checks statistic ids against the registry.
    pub fn check_stats(&self, registry: &StatRegistry) -> Result<()> {
        for id in &self.stats {
            registry.resolve(id)?;
        }
        Ok(())
    }

    pub fn data(&self) -> Result<&DataConfig> {
        self.data
            .as_ref()
            .ok_or_else(|| Error::Config("the config has no [data] section".into()))
    }

    /// Event windows to analyse, main date first.
    pub fn scenarios(&self) -> Result<Vec<EventScenario>> {
        let ev = self
            .event
            .as_ref()
            .ok_or_else(|| Error::Config("the config has no [event] section".into()))?;
        let mut out = Vec::new();
        if let Some(date) = ev.date {
            out.push(EventScenario {
                label: ev.label.clone(),
                date,
                end: ev.end,
            });
        }
        out.extend(ev.scenarios.iter().cloned());
        if out.is_empty() {
            return Err(Error::Config("[event] needs `date` or `scenarios`".into()));
        }
        for (i, s) in out.iter().enumerate() {
            if !valid_label(&s.label) {
                return Err(Error::Config(format!(
                    "scenario label `{}` must be non-empty ASCII letters, digits, `-` or `_`",
                    s.label
                )));
            }
            if out[..i].iter().any(|o| o.label == s.label) {
                return Err(Error::Config(format!("duplicate scenario label `{}`", s.label)));
            }
        }
        Ok(out)
    }

    /// The Monte Carlo grid, falling back to the desk-scale default.
    pub fn mc_config(&self) -> McConfig {
        let mut mc = self.mc.clone().unwrap_or_else(|| {
            let mut m = default_mc();
            m.base.seed = self.seed;
            m
        });
        mc.stats = if mc.stats.is_empty() { self.stats.clone() } else { mc.stats };
        mc
    }
}

fn valid_label(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl DataConfig {
    pub fn load_panel(&self) -> Result<Panel> {
        let mut panel = ingest_csv(&self.stations, &self.observations, &self.covariates)?;
        if !self.static_covariates.is_empty() {
            panel = panel.with_static_covariates(&self.static_covariates)?;
        }
        if !self.lagged.is_empty() {
            if self.lags.is_empty() {
                return Err(Error::Config("`lagged` covariates need a `lags` list".into()));
            }
            panel = panel.add_lagged_covariates(&self.lagged, &self.lags)?;
        }
        if self.intercept {
            panel = panel.with_intercept();
        }
        Ok(panel)
    }
}

/// Desk-scale grid: independent and strongly dependent panels, shifts
/// 0, -0.5, -1 and -2 marginal sd, lm normal values, 200 replications.
pub fn default_mc() -> McConfig {
    McConfig {
        base: SimConfig {
            n_stations: 10,
            tau0: 200,
            tau1: 20,
            params: HdgmParams {
                beta: vec![2.0, 0.5, -0.3],
                g: 0.0,
                nu: 0.0,
                theta: 1000.0,
                sigma2_eps: 1.0,
                smoothness: Smoothness::Half,
            },
            layout: StationLayout::Square { side_km: 50.0 },
            n_covariates: 2,
            shift: 0.0,
            seed: 0,
        },
        scenarios: vec![
            McScenario {
                label: "independent".into(),
                ..Default::default()
            },
            McScenario {
                label: "dependent".into(),
                nu: Some(1.1),
                ..Default::default()
            },
        ],
        shifts: vec![0.0, -0.5, -1.0, -2.0],
        models: vec![NcModel::Lm],
        replications: 200,
        stats: Vec::new(),
        abnormal: AbnormalOptions::default(),
        model_options: ModelOptions::default(),
        tail: Tail::Left,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_defaults() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.model_list().unwrap(), NcModel::ALL.to_vec());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("modles = [\"lm\"]").is_err());
    }

    #[test]
    fn scenarios_put_main_date_first() {
        let cfg: RunConfig = toml::from_str(
            r#"
            [event]
            date = "2020-03-09"
            [[event.scenarios]]
            label = "anticipated"
            date = "2020-03-01"
            "#,
        )
        .unwrap();
        let sc = cfg.scenarios().unwrap();
        assert_eq!(sc.len(), 2);
        assert_eq!(sc[0].label, "main");
        assert_eq!(sc[1].date, NaiveDate::from_ymd_opt(2020, 3, 1).unwrap());
    }

    #[test]
    fn bad_labels() {
        let mut cfg = RunConfig::default();
        cfg.event = Some(EventConfig {
            date: NaiveDate::from_ymd_opt(2020, 1, 1),
            end: None,
            label: "a/b".into(),
            scenarios: vec![],
        });
        assert!(matches!(cfg.scenarios(), Err(Error::Config(_))));
    }

    #[test]
    fn default_grid_roundtrips_through_toml() {
        let cfg = RunConfig {
            mc: Some(default_mc()),
            ..Default::default()
        };
        let back: RunConfig = toml::from_str(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn readme_config_parses() {
        let readme = include_str!("../../../../README.md");
        let block = readme.split("```toml\n").nth(1).unwrap().split("```").next().unwrap();
        let cfg: RunConfig = toml::from_str(block).unwrap();
        assert_eq!(cfg.scenarios().unwrap().len(), 3);
        assert_eq!(cfg.model_list().unwrap().len(), 4);
        let mc = cfg.mc_config();
        assert_eq!(mc.scenarios[1].nu, Some(1.1));
        mc.validate(&StatRegistry::default()).unwrap();
    }
}
