use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Input violates a static no-arbitrage condition.
    #[error("arbitrage violation at index {index}: {reason}")]
    Arbitrage { index: usize, reason: String },

    /// Argument outside the domain where a quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Iterative solver hit its cap.
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// Adaptive quadrature could not reach the requested tolerance.
    #[error("quadrature on [{a}, {b}] did not converge: estimate {estimate:e}, error {error:e}")]
    Quadrature {
        a: f64,
        b: f64,
        estimate: f64,
        error: f64,
    },

    /// A bucket solve failed; wraps the underlying cause.
    #[error("bucket {index}: {source}")]
    Bucket {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

impl Error {
    pub(crate) fn in_bucket(self, index: usize) -> Self {
        match self {
            e @ Error::Bucket { .. } => e,
            e => Error::Bucket {
                index,
                source: Box::new(e),
            },
        }
    }

    /// Innermost cause, looking through bucket wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Bucket { source, .. } => source.root(),
            e => e,
        }
    }
}
