use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A distribution or experiment parameter is invalid.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Adaptive quadrature did not reach the requested tolerance.
    #[error("quadrature did not converge: estimate {estimate:e}, error estimate {abs_error:e}")]
    Quadrature { estimate: f64, abs_error: f64 },

    /// The operation is not available for this input (e.g. a source without
    /// an exact transform recipe).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A caller-supplied object violates a required contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A truncated pmf leaves more tail mass than allowed.
    #[error("truncation at {truncation} leaves tail mass {tail_mass:e} (limit {limit:e})")]
    Truncation {
        truncation: usize,
        tail_mass: f64,
        limit: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Domain(format!("{what} must be finite, got {x}")))
    }
}
