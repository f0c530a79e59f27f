use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the range an operation accepts.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// The input is well formed but outside the mathematical domain of the
    /// operation (not in the cone, dynamic condition violated, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported dimension n = {0}")]
    UnsupportedDimension(usize),

    /// A grid function fails the admissibility requirement at a node.
    #[error("admissibility error at node {node:?}: {reason}")]
    Admissibility { node: Vec<usize>, reason: String },

    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:e}): {reason}")]
    Nonconvergence {
        iterations: usize,
        residual: f64,
        reason: String,
    },

    #[error("linear algebra error: {0}")]
    LinearAlgebra(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("malformed grid file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
