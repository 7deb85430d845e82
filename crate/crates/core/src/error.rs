use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("integer overflow: {0}")]
    Overflow(String),

    #[error("invalid grid pitch {eta} or shrink factor {rho}")]
    InvalidPitch { eta: f64, rho: f64 },

    #[error("point {point:?} lies outside the domain box")]
    OutOfDomain { point: Vec<f64> },

    #[error("piece enumeration supports n <= 2, got n = {0}")]
    UnsupportedDimension(usize),

    #[error("lattice realization disagrees with the pieces by {gap:e} at {point:?}")]
    Inconsistent { gap: f64, point: Vec<f64> },

    #[error("trajectory diverged at t = {t}: |x| = {norm}")]
    Diverged { t: f64, norm: f64 },
}
