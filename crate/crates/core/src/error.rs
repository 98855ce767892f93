use thiserror::Error;

/// Errors raised by the models, the integrator and the analysis tools.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("integration diverged at t = {time}: non-finite state or derivative")]
    IntegrationDiverged { time: f64 },

    #[error("singular configuration: {0}")]
    SingularConfiguration(&'static str),

    #[error("invalid transition: guard value {guard} exceeds tolerance")]
    InvalidTransition { guard: f64 },

    #[error("kick force is singular at leg angle {theta} rad (|theta| >= pi/2)")]
    SingularKick { theta: f64 },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("centre of mass at {com_x} lies outside the support span [{hind_x}, {fore_x}]")]
    TippingInfeasible { com_x: f64, hind_x: f64, fore_x: f64 },

    #[error("infeasible contact geometry: {0}")]
    InfeasibleGeometry(&'static str),

    #[error("fall during return-map cycle at t = {time}")]
    FallDuringCycle { time: f64 },

    #[error("touchdown unreachable: apex height {z_apex} is not above the contact surface {surface}")]
    UnreachableTouchdown { z_apex: f64, surface: f64 },

    #[error("no apex between liftoff and the next touchdown")]
    MissedApex,

    #[error("fixed-point search did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Check that a named parameter is finite and strictly positive.
pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive, got {value}")))
    }
}

pub(crate) fn require_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite, got {value}")))
    }
}
