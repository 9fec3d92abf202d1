//! Command-line front end: argument parsing, config resolution and the
//! subcommands. The `stevent` binary only parses arguments and calls [`run`].

mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    cmd_diagnostics, cmd_evstudy, cmd_fit, cmd_ingest_check, cmd_mc, write_atomic, FitArtifact, SignConsistencyRow,
};
pub use config::{RunConfig, CONFIG_VERSION};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "stevent", version, about = "Event studies on spatially correlated station panels")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    pub log_level: String,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SelectionArgs {
    /// Comma-separated models (hdgm, lm, regar1, regarma, all).
    #[arg(long, value_delimiter = ',')]
    pub model: Vec<String>,
    /// Comma-separated statistic ids.
    #[arg(long, value_delimiter = ',')]
    pub stats: Vec<String>,
    /// Replaces the configured event date(s) with a single one.
    #[arg(long)]
    pub event_date: Option<chrono::NaiveDate>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest the data files and report panel shape, gaps and windows.
    IngestCheck(SelectionArgs),
    /// Fit the selected models for every event scenario.
    Fit(SelectionArgs),
    /// Battery, diagnostics and plot data for every scenario and model.
    Evstudy {
        #[command(flatten)]
        sel: SelectionArgs,
        /// Reuse fit artifacts written by `fit` instead of refitting.
        #[arg(long)]
        from_fits: Option<PathBuf>,
    },
    /// Monte Carlo size/power grid.
    Mc {
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Estimation-window diagnostics of abnormal values.
    Diagnostics(SelectionArgs),
}

/// Loads the config file (if any) and applies command-line overrides.
pub fn resolve_config(global: &GlobalArgs, sel: Option<&SelectionArgs>) -> Result<RunConfig> {
    let mut cfg = match &global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = global.seed {
        cfg.seed = s;
        if let Some(mc) = &mut cfg.mc {
            mc.base.seed = s;
        }
    }
    if let Some(o) = &global.out {
        cfg.out = o.clone();
    }
    if let Some(t) = global.threads {
        if t == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        cfg.threads = Some(t);
    }
    if let Some(sel) = sel {
        if !sel.model.is_empty() {
            cfg.models = sel.model.clone();
        }
        if !sel.stats.is_empty() {
            cfg.stats = sel.stats.clone();
        }
        if let Some(d) = sel.event_date {
            let ev = cfg.event.get_or_insert_with(|| config::EventConfig {
                date: None,
                end: None,
                label: "main".into(),
                scenarios: Vec::new(),
            });
            ev.date = Some(d);
            ev.end = None;
            ev.scenarios.clear();
        }
    }
    Ok(cfg)
}

/// Runs one parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let sel = match &cli.command {
        Command::IngestCheck(s) | Command::Fit(s) | Command::Diagnostics(s) => Some(s),
        Command::Evstudy { sel, .. } => Some(sel),
        Command::Mc { .. } => None,
    };
    let mut cfg = resolve_config(&cli.global, sel)?;
    if let Some(t) = cfg.threads {
        // fails only when the global pool already exists, e.g. in tests
        if rayon::ThreadPoolBuilder::new().num_threads(t).build_global().is_err() {
            log::debug!("thread pool already initialised; --threads ignored");
        }
    }
    match cli.command {
        Command::IngestCheck(_) => cmd_ingest_check(&cfg),
        Command::Fit(_) => cmd_fit(&cfg),
        Command::Evstudy { from_fits, .. } => cmd_evstudy(&cfg, from_fits.as_deref()),
        Command::Mc { replications } => {
            if let Some(r) = replications {
                let mut mc = cfg.mc_config();
                mc.replications = r;
                cfg.mc = Some(mc);
            }
            cmd_mc(&cfg)
        }
        Command::Diagnostics(_) => cmd_diagnostics(&cfg),
    }
}
