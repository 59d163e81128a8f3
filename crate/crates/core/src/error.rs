use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("{what} = {value} is outside {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    /// A caller-side contract was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An adaptive quadrature exhausted its subdivision budget.
    #[error("quadrature did not converge on [{a}, {b}]: error estimate {estimate:e} after {subdivisions} subdivisions (target {target:e})")]
    NoConvergence {
        a: f64,
        b: f64,
        estimate: f64,
        target: f64,
        subdivisions: usize,
    },

    /// Cholesky factorization failed even after diagonal jitter.
    #[error("covariance matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    /// A bundle file could not be decoded.
    #[error("malformed bundle file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value,
            domain: "[0, 1]",
        })
    }
}
