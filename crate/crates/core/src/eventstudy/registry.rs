use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::AbnormalPanel;
use crate::error::{Error, Result};
use crate::stats::{normal_cdf, student_t_cdf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    T,
    Patell,
    Bmp,
    Corrado,
    Grank,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::T => "t",
            Family::Patell => "patell",
            Family::Bmp => "bmp",
            Family::Corrado => "corrado",
            Family::Grank => "grank",
        })
    }
}

/// Null distribution a statistic is referred to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "distribution", rename_all = "snake_case")]
pub enum Reference {
    StandardNormal,
    StudentT { df: f64 },
}

impl Reference {
    /// Lower-tail probability of `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_infinite() {
            return if x < 0.0 { 0.0 } else { 1.0 };
        }
        match *self {
            Reference::StandardNormal => normal_cdf(x),
            Reference::StudentT { df } => student_t_cdf(x, df),
        }
    }
}

impl fmt::Display for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reference::StandardNormal => f.write_str("N(0,1)"),
            Reference::StudentT { df } => write!(f, "t({df})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub stat_id: String,
    pub value: f64,
    pub p_left: f64,
    pub cd_adjusted: bool,
    pub family: Family,
    pub reference: Reference,
}

impl TestResult {
    pub fn new(stat_id: &str, value: f64, family: Family, cd_adjusted: bool, reference: Reference) -> Self {
        TestResult {
            stat_id: stat_id.to_string(),
            value,
            p_left: reference.cdf(value).clamp(0.0, 1.0),
            cd_adjusted,
            family,
            reference,
        }
    }

    /// p-value under the requested alternative.
    pub fn p_value(&self, tail: Tail) -> f64 {
        match tail {
            Tail::Left => self.p_left,
            Tail::TwoSided => (2.0 * self.p_left.min(1.0 - self.p_left)).min(1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    #[default]
    Left,
    TwoSided,
}

/// A user-supplied statistic: value and its reference distribution.
pub type CustomKernel = Arc<dyn Fn(&AbnormalPanel) -> Result<(f64, Reference)> + Send + Sync>;

#[derive(Clone)]
pub(crate) enum Kernel {
    Builtin,
    Custom(CustomKernel),
    Unavailable,
}

#[derive(Clone)]
pub struct StatEntry {
    pub id: String,
    pub family: Family,
    pub cd_adjusted: bool,
    /// Where the formula comes from and how it is evaluated here.
    pub source: String,
    pub(crate) kernel: Kernel,
}

impl StatEntry {
    pub fn is_available(&self) -> bool {
        !matches!(self.kernel, Kernel::Unavailable)
    }
}

impl fmt::Debug for StatEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StatEntry")
            .field("id", &self.id)
            .field("family", &self.family)
            .field("cd_adjusted", &self.cd_adjusted)
            .field("available", &self.is_available())
            .finish()
    }
}

pub const CROSS_T: &str = "cross_T_test";
pub const CRUDE_DEP_T: &str = "crude_dep_T_test";
pub const T_SKEW: &str = "T_skew";
pub const Z_PATELL: &str = "Z_patell";
pub const Z_BMP: &str = "Z_BMP";
pub const Z_GRANK: &str = "Z_grank";
pub const CUMRANK_Z: &str = "CumRank_Z";
pub const Z_PATELL_ADJ: &str = "Z_patell_adj";
pub const Z_BMP_ADJ: &str = "Z_BMP_adj";
pub const T_GRANK: &str = "T_grank";
pub const Z_GRANK_ADJ: &str = "Z_grank_adj";
pub const CUMRANK: &str = "CumRank";
pub const CUMRANK_MOD: &str = "CumRank_mod";
pub const CUMRANK_T: &str = "CumRank_T";
pub const CUMRANK_Z_ADJ: &str = "CumRank_Z_adj";
pub const P1: &str = "P1";
pub const P2: &str = "P2";
pub const CORRADO_TUKEY_ADJ: &str = "Corrado_Tukey_adj";

const BUILTIN: [(&str, Family, bool, &str); 18] = [
    (CROSS_T, Family::T, false, "Brown and Warner (1985): mean(CAC) / (sd(CAC)/sqrt(N)), t(N-1)"),
    (
        CRUDE_DEP_T,
        Family::T,
        false,
        "Brown and Warner (1985): sum of event-window mean AC / (sqrt(tau1) sd of the estimation-window mean AC), t(tau0-1)",
    ),
    (
        T_SKEW,
        Family::T,
        false,
        "Hall (1992) skewness correction of the cross-sectional t: sqrt(N)(S + g S^2/3 + g^2 S^3/27 + g/(6N)), t(N-1)",
    ),
    (
        Z_PATELL,
        Family::Patell,
        false,
        "Patell (1976): sum CSAR / sqrt(sum tau1 (tau0-2)/(tau0-4)), N(0,1)",
    ),
    (
        Z_BMP,
        Family::Bmp,
        false,
        "Boehmer, Musumeci and Poulsen (1991): sqrt(N) mean(SCAR)/sd(SCAR), t(N-1)",
    ),
    (
        Z_GRANK,
        Family::Grank,
        false,
        "Kolari and Pynnonen (2011) generalized rank, event rank sum over its independence variance, N(0,1)",
    ),
    (
        CUMRANK_Z,
        Family::Corrado,
        false,
        "Corrado (1989) ranks, event rank sum over its within-station permutation variance, N(0,1)",
    ),
    (
        Z_PATELL_ADJ,
        Family::Patell,
        true,
        "Kolari and Pynnonen (2011): Z_patell / sqrt(1 + (N-1) r_bar), N(0,1)",
    ),
    (
        Z_BMP_ADJ,
        Family::Bmp,
        true,
        "Kolari and Pynnonen (2011): Z_BMP sqrt((1 - r_bar)/(1 + (N-1) r_bar)), t(N-1)",
    ),
    (
        T_GRANK,
        Family::Grank,
        true,
        "Kolari and Pynnonen (2011): Z sqrt((T-2)/(T-1-Z^2)), Z = U_E/S_U, t(tau0-1)",
    ),
    (
        Z_GRANK_ADJ,
        Family::Grank,
        true,
        "Kolari and Pynnonen (2011): Z_grank / sqrt(1 + (N-1) r_bar_U), N(0,1)",
    ),
    (
        CUMRANK,
        Family::Corrado,
        true,
        "Corrado (1989) cumulated: sum event U_t / (sqrt(tau1) s_U), N(0,1)",
    ),
    (
        CUMRANK_MOD,
        Family::Corrado,
        true,
        "Corrado and Zivney (1992): CumRank with sqrt(N_t/N) missing-station weights, N(0,1)",
    ),
    (
        CUMRANK_T,
        Family::Corrado,
        true,
        "Corrado and Zivney (1992) t form: pooled two-sample t of event vs estimation weighted U_t, t(tau0+tau1-2)",
    ),
    (
        CUMRANK_Z_ADJ,
        Family::Corrado,
        true,
        "Hagnas and Pynnonen (2014): CumRank with the sqrt((tau-tau1)/(tau-1)) finite-population factor, N(0,1)",
    ),
    (P1, Family::Corrado, true, "companion-reference formula not available; extension slot"),
    (P2, Family::Corrado, true, "companion-reference formula not available; extension slot"),
    (
        CORRADO_TUKEY_ADJ,
        Family::Corrado,
        true,
        "companion-reference formula not available; extension slot",
    ),
];

/// Statistic identifiers mapped to kernels.
#[derive(Clone, Debug)]
pub struct StatRegistry {
    entries: Vec<StatEntry>,
}

impl Default for StatRegistry {
    fn default() -> Self {
        let entries = BUILTIN
            .iter()
            .map(|&(id, family, cd_adjusted, source)| StatEntry {
                id: id.to_string(),
                family,
                cd_adjusted,
                source: source.to_string(),
                kernel: if source.starts_with("companion") {
                    Kernel::Unavailable
                } else {
                    Kernel::Builtin
                },
            })
            .collect();
        StatRegistry { entries }
    }
}

impl StatRegistry {
    pub fn entries(&self) -> &[StatEntry] {
        &self.entries
    }

    pub fn ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.id.clone()).collect()
    }

    /// Ids with a kernel behind them.
    pub fn available_ids(&self) -> Vec<String> {
        self.entries.iter().filter(|e| e.is_available()).map(|e| e.id.clone()).collect()
    }

    pub fn get(&self, id: &str) -> Option<&StatEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Looks an id up, falling back to a case-insensitive match.
    pub fn resolve(&self, id: &str) -> Result<&StatEntry> {
        self.get(id)
            .or_else(|| self.entries.iter().find(|e| e.id.eq_ignore_ascii_case(id)))
            .ok_or_else(|| Error::UnknownStatistic {
                requested: id.to_string(),
                available: self.ids(),
            })
    }

    /// Adds a statistic, or fills an unavailable slot of the same id.
    pub fn register(
        &mut self,
        id: &str,
        family: Family,
        cd_adjusted: bool,
        source: &str,
        kernel: CustomKernel,
    ) -> Result<()> {
        let entry = StatEntry {
            id: id.to_string(),
            family,
            cd_adjusted,
            source: source.to_string(),
            kernel: Kernel::Custom(kernel),
        };
        match self.entries.iter_mut().find(|e| e.id == id) {
            Some(slot) if !slot.is_available() => *slot = entry,
            Some(_) => return Err(Error::Config(format!("statistic `{id}` is already registered"))),
            None => self.entries.push(entry),
        }
        Ok(())
    }
}
