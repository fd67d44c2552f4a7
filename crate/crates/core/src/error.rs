use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter lies outside the domain an operation is defined on.
    #[error("parameter domain: {0}")]
    Domain(String),

    /// An index is out of range for the model dimensions.
    #[error("index out of range: {0}")]
    Index(String),

    /// A caller-supplied function or value breaks the operation's contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A precondition of a theorem or formula does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// Adaptive quadrature could not reach the requested tolerance.
    #[error("numerical integration did not converge: achieved relative error {achieved:e}, requested {requested:e}")]
    Integration { achieved: f64, requested: f64 },

    /// A Monte Carlo sampler produced non-finite conditional parameters.
    #[error("sampler: {0}")]
    Sampler(String),

    /// A truncated lattice would exceed the configured size budget.
    #[error("resource budget exceeded: {0}")]
    Resource(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
