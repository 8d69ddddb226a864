use thiserror::Error;

/// Errors raised anywhere in the reduction pipeline.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix must have at least one row and one column, got {rows}x{cols}")]
    Empty { rows: usize, cols: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("{what} did not converge for a {rows}x{cols} matrix")]
    NumericalFailure {
        what: &'static str,
        rows: usize,
        cols: usize,
    },

    #[error("column generation failed: {0}")]
    Generation(String),

    #[error("variable selection failed: {0}")]
    Selection(String),

    #[error("value {value} lies too far outside the basis domain [{lo}, {hi}]; rebuild the basis from the data range")]
    Domain { value: f64, lo: f64, hi: f64 },

    #[error("curvature operator has {near_zero} near-zero singular values, expected exactly one")]
    BasisDegenerate { near_zero: usize },

    #[error("contract violated: {0}")]
    Contract(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
