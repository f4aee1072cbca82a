use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dipole decay rate {gamma2} 1/s is below the radiative limit gamma/2 = {limit} 1/s")]
    DephasingBelowRadiative { gamma2: f64, limit: f64 },

    #[error("invalid grid `{name}`: {reason}")]
    InvalidGrid { name: &'static str, reason: String },

    #[error("state is not a fixed point of the flow (|rhs| = {residual:e}, tolerance {tolerance:e})")]
    NotFixedPoint { residual: f64, tolerance: f64 },

    #[error("step size underflow at tau = {tau}: h = {step:e}")]
    StepSizeUnderflow { tau: f64, step: f64 },

    #[error("integrator exceeded {max_steps} steps before tau = {tau_end} (reached {tau})")]
    TooManySteps { max_steps: usize, tau: f64, tau_end: f64 },

    #[error("line cannot be resolved with this configuration: {}", violations.join("; "))]
    Unresolvable { violations: Vec<String> },

    #[error("lineshape fit failed ({reason}); residual norm {residual_norm:e}")]
    FitFailed { reason: String, residual_norm: f64 },

    #[error("no root found: {0}")]
    NoRoot(String),

    #[error("unknown species `{0}`")]
    UnknownSpecies(String),

    #[error("catalog error: {0}")]
    Catalog(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// True for failures of a numerical procedure on otherwise valid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotFixedPoint { .. }
                | Error::StepSizeUnderflow { .. }
                | Error::TooManySteps { .. }
                | Error::FitFailed { .. }
                | Error::NoRoot(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and > 0, got {value}")))
    }
}

pub(crate) fn require_non_negative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and >= 0, got {value}")))
    }
}

pub(crate) fn require_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite, got {value}")))
    }
}
