use thiserror::Error;

/// Errors raised anywhere in the simulation stack.
///
/// The variants are grouped so a caller can map them onto process exit
/// codes: [`Error::is_numeric`] separates solver failures from bad input.
#[derive(Debug, Error)]
pub enum Error {
    /// A physical parameter lies outside its admissible range.
    #[error("parameter domain error: {0}")]
    Domain(String),

    /// A configuration is inconsistent or incomplete.
    #[error("configuration error: {0}")]
    Config(String),

    /// Filter synthesis could not reach the requested target.
    #[error("synthesis failed: requested bandwidth {requested_hz:.4e} Hz, achievable range [{min_hz:.4e}, {max_hz:.4e}] Hz")]
    Synthesis {
        requested_hz: f64,
        min_hz: f64,
        max_hz: f64,
    },

    /// Integration step violates the explicit stability guard.
    #[error("integration step {step:.3e} us exceeds stability limit {limit:.3e} us")]
    Stability { step: f64, limit: f64 },

    /// Stationary state of a generator is not unique.
    #[error("steady state is not unique: null space dimension {dimension}")]
    Multiplicity { dimension: usize },

    /// Calibration could not find an improvement over its starting point.
    #[error("calibration failed: {0}")]
    Calibration(String),

    /// Linear-algebra or other numerical failure.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Numeric(_) | Error::Multiplicity { .. } | Error::Stability { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
