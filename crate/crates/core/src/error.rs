use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("unsorted GPS stream for truck {truck}: timestamp {at} follows {prev}")]
    UnsortedStream { truck: String, prev: i64, at: i64 },

    #[error("fuel economy {economy} mi/kWh at hour {hour} is not positive")]
    NonPositiveEconomy { hour: usize, economy: f64 },

    #[error("robust mode requires parking-duration moments")]
    MissingMoments,

    #[error("cannot fix fast charging for truck {truck} at slot {slot}: not a parking slot")]
    FixOutsideWindow { truck: usize, slot: usize },

    #[error("model is infeasible: {0}")]
    Infeasible(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("installation value {value} for zone {zone} is not integral")]
    FractionalInstallation { zone: usize, value: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
