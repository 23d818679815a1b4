use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid tensor space: {0}")]
    InvalidSpace(String),

    #[error("tensor lies outside the subspace (residual {residual:e} > {tol:e})")]
    OutsideSubspace { residual: f64, tol: f64 },

    #[error("expression error: {0}")]
    Expr(String),

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("{line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("family error: {0}")]
    Family(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
