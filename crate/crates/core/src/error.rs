use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A diagonal (resonant) coefficient exceeded the solvability tolerance.
    #[error("resonant source at mode ({k},{l}): |{value:e}| exceeds tolerance {tol:e}")]
    ResonantSource { k: usize, l: usize, value: f64, tol: f64 },

    #[error("small divisor {value:e} at mode ({k},{l})")]
    SmallDivisor { k: usize, l: usize, value: f64 },

    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("singular jacobian at iteration {iteration}")]
    SingularJacobian { iteration: usize },

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("no real periodic orbit: {0}")]
    NoPeriodicOrbit(String),

    #[error("light-cone degenerate velocity")]
    LightCone,

    #[error("time step {dt:e} violates stability bound {bound:e}")]
    Stability { dt: f64, bound: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("conditioning event has probability {probability:e}")]
    ZeroProbability { probability: f64 },

    #[error("inconsistent result: {0}")]
    Inconsistent(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// True for failures of a numerical procedure on otherwise valid input
    /// (non-convergence, instability, degenerate regimes).
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::Domain(_) | Error::DimensionMismatch { .. } | Error::InvalidInput(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
