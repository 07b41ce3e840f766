use thiserror::Error;

#[derive(Debug, Error)]
pub enum DickeError {
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("signal error: {0}")]
    Signal(String),
    #[error("eigen-solver failure: {0}")]
    Eigen(String),
    #[error("stability verdicts disagree: {0}")]
    StabilityMismatch(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DickeError>;
