use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid model definition: {0}")]
    InvalidSpec(String),

    #[error("quadrature did not converge on [{a}, {b}] (estimated error {error:e}, tolerance {tol:e})")]
    Quadrature { a: f64, b: f64, error: f64, tol: f64 },

    #[error("eigenvalue iteration did not converge after {0} iterations")]
    EigenNonConvergence(usize),

    #[error("drift is not stable: {0}")]
    Stability(String),

    #[error("matrix exponential overflow (norm {0:e})")]
    ExpmOverflow(f64),

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("singular matrix")]
    Singular,

    #[error("covariance is not positive semidefinite (min eigenvalue {min_eig:e}, trace {trace:e})")]
    NotPsd { min_eig: f64, trace: f64 },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
