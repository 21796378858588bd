use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("transport marginals infeasible: mass gap {gap:.3e}")]
    InfeasibleMarginals { gap: f64 },

    #[error("empty measure: {0}")]
    EmptyMeasure(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}, line {line}: {msg}")]
    Csv {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("data corruption: {0}")]
    Corrupt(String),
}

impl Error {
    /// True for errors caused by bad inputs or configuration rather than
    /// failures encountered mid-computation. The CLI maps these to exit
    /// code 2, everything else to 1.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
