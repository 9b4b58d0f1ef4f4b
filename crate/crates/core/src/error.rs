use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("interval [{t_a}, {t_b}] lies outside the signal window [{w0}, {w1}]")]
    Domain { t_a: f64, t_b: f64, w0: f64, w1: f64 },

    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    /// Unshifted encoding stalled on an interval whose signal energy never
    /// left the numerical floor.
    #[error("signal energy stayed below the numerical floor on interval {index} starting at t = {t_start} s")]
    LowEnergy { index: usize, t_start: f64 },

    #[error("encoder exceeded {0} firings")]
    TooManyFirings(usize),

    #[error("encoding is empty")]
    EmptyEncoding,

    #[error("non-contraction: iterate norm grew more than 10x over 10 iterations; largest residual on interval {interval}")]
    NonContraction { interval: usize },

    #[error("reference signal has zero norm")]
    ZeroReference,

    #[error("encoding metadata does not match: {0}")]
    MetadataMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
