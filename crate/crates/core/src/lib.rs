pub mod baselines;
pub mod cli;
pub mod diagnostics;
pub mod eventstudy;
pub mod error;
pub mod hdgm;
pub mod linreg;
pub mod model;
pub mod optim;
pub mod panel;
pub mod simgen;
pub mod stats;

pub use error::{Error, Result};
