use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("singular normal-equation system (pivot {pivot:e} at column {column}); use a positive ridge such as 1e-6")]
    SingularSystem { column: usize, pivot: f64 },

    #[error("t-test undefined: {0}")]
    UndefinedTest(&'static str),

    #[error("perturbation spike was not granted, initial distance is zero")]
    DegeneratePerturbation,

    #[error("{path}: {message}")]
    Load { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error("run (pool_size={pool_size:?}, cost={cost}, seed_index={seed_index}): {source}")]
    Run {
        pool_size: Option<usize>,
        cost: f64,
        seed_index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
