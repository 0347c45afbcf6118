use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in record {record} (line {line}): {message}")]
    Parse {
        record: usize,
        line: usize,
        message: String,
    },

    #[error("series {id}: invalid value {value} at index {index} (values must be finite and > 0)")]
    NonPositive { id: String, index: usize, value: f64 },

    #[error("series {id}: {message}")]
    InvalidSeries { id: String, message: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("recursion produced a non-finite state at t={t}")]
    Recursion { t: usize },

    #[error("quadrature did not converge: estimate {estimate}, error bound {error} > tolerance {tolerance}")]
    Quadrature {
        estimate: f64,
        error: f64,
        tolerance: f64,
    },

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("degenerate series: {0}")]
    Degenerate(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
