use thiserror::Error;

use nalgebra::DVector;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller passed arguments outside the documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An internal identity that must hold by construction was violated.
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// An iterative solver stopped before reaching its tolerance.
    /// The best iterate found so far is attached when one exists.
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
        best: Option<DVector<f64>>,
    },

    /// A non-finite value appeared in a numerical routine.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// The asynchronous schedule broke its delay bound.
    #[error("delay {delay} at iteration {iteration} exceeds bound {bound}")]
    DelayBound {
        iteration: usize,
        delay: usize,
        bound: usize,
    },

    /// A sampled service time exceeded the declared maximum.
    #[error("service time {service} exceeds maximum {max}")]
    ServiceTime { service: u32, max: u32 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn ensure_finite(what: &str, v: &DVector<f64>) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("{what} contains a non-finite entry")))
    }
}

pub(crate) fn ensure_dim(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{what} has dimension {got}, expected {want}"
        )))
    }
}
