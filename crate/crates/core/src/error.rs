use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{message}, row {row}")]
    Row { row: usize, message: String },

    #[error("missing column `{0}` in header")]
    MissingColumn(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("perfect separation detected: {0}")]
    Separation(String),

    #[error("monotone likelihood: {0}")]
    MonotoneLikelihood(String),

    #[error("did not converge after {iterations} iterations (max |gradient| = {gradient:e})")]
    NonConvergence { iterations: usize, gradient: f64 },

    #[error("query budget of {0} exhausted")]
    BudgetExhausted(usize),

    #[error("plan validation failed: {0}")]
    Plan(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}
