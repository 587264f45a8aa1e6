use thiserror::Error;

/// Errors shared by all modules of the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("sphere quadrature is not available in dimension {0} (supported: 2, 3)")]
    UnsupportedDimension(usize),

    #[error("evaluation point coincides with an atom at {0:?}")]
    AtomCollision(Vec<f64>),

    #[error("simplex iteration cap of {cap} pivots exceeded")]
    IterationCap { cap: usize },

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("degenerate sampling window: {0}")]
    DegenerateWindow(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
