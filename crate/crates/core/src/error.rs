use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numerical guard tripped; `report` carries whatever diagnostics were
    /// available at the point of failure.
    #[error("internal error: {message} ({report})")]
    Internal { message: String, report: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("estimator undefined: record for round {round} has propensity {propensity}")]
    EstimatorUndefined { round: usize, propensity: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
