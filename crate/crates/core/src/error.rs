use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("empty grid for {0}")]
    EmptyGrid(&'static str),

    #[error("simulator failed at sample {index}: {message}")]
    Plant { index: usize, message: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("LP solver hit the iteration limit ({0} iterations)")]
    IterationLimit(usize),

    #[error(
        "posterior bound vacuous for these inputs: no sign change on the bracket \
         (g(lo) {lo_sign}, g(hi) {hi_sign})"
    )]
    NoSignChange { lo_sign: &'static str, hi_sign: &'static str },

    #[error("planner: {0}")]
    Planner(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
