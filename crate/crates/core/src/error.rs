use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("index out of range: {0}")]
    Index(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invariant violated: {what} (residual {residual:e})")]
    Invariant { what: String, residual: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("not composable: end mismatch {0:e}")]
    NotComposable(f64),
    #[error("logarithm outside principal branch")]
    LogBranch,
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
