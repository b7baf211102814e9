use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("window too small: {0}")]
    WindowTooSmall(String),

    #[error("not relatively dense at claimed R' = {radius}: no point in the cell centred at {cell:?}")]
    NotRelativelyDense { radius: f64, cell: Vec<f64> },

    #[error("index mismatch: {0}")]
    IndexMismatch(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("E in spectrum: energy {energy} coincides with eigenvalue {eigenvalue}")]
    SpectrumHit { energy: f64, eigenvalue: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("L too small for the scale choice: {0}")]
    ScaleTooSmall(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("lower bound on W violated at node {node} (x = {position:?}): W = {value}, required {required}")]
    LowerBoundViolated {
        node: usize,
        position: Vec<f64>,
        value: f64,
        required: f64,
    },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
