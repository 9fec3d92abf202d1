//! Abnormal values and the event-study test battery.
//!
//! Every statistic tests `E[CAC] = 0` against a negative shift; p-values
//! are lower-tail unless [`Tail::TwoSided`] is requested.

mod abnormal;
mod families;
pub mod kernels;
mod registry;
mod report;

pub use abnormal::{compute_abnormal, compute_abnormal_with, AbnormalOptions, AbnormalPanel};
pub use families::{bmp_family, corrado_family, grank_family, patell_family, t_family};
pub use registry::*;
pub use report::{mean_ac_csv, mean_ac_series, run_battery, stars, BatteryReport, BatteryRow, MeanAcPoint, RowStatus};
