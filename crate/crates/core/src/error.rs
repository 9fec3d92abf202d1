use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
///
/// Variants are grouped so the command-line front end can map them onto
/// distinct exit codes (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("ingestion error in {file}: {message}")]
    Ingest { file: String, message: String },

    #[error("unknown station id `{0}`")]
    UnknownStation(String),

    #[error("duplicate record for station `{station}` at {timestamp}")]
    Duplicate { station: String, timestamp: String },

    #[error("timeline error: {0}")]
    Timeline(String),

    #[error("window error: {0}")]
    Window(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("rank-deficient design; collinear columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("unknown statistic `{requested}`; available: {}", .available.join(", "))]
    UnknownStatistic {
        requested: String,
        available: Vec<String>,
    },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error class.
    ///
    /// 2 configuration, 3 data, 4 numerical, 5 I/O, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::UnknownStatistic { .. } => 2,
            Error::Ingest { .. }
            | Error::UnknownStation(_)
            | Error::Duplicate { .. }
            | Error::Timeline(_)
            | Error::Window(_)
            | Error::Data(_)
            | Error::Csv(_) => 3,
            Error::Parameter(_) | Error::RankDeficient(_) | Error::Numerical(_) => 4,
            Error::Io { .. } | Error::Json(_) => 5,
            Error::Internal(_) => 1,
        }
    }
}
