use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("maximum number of steps ({0}) exceeded")]
    TooManySteps(usize),

    #[error("invariant `{invariant}` drifted by {drift:e} at t = {t} (abort threshold {threshold:e})")]
    InvariantDrift {
        invariant: &'static str,
        drift: f64,
        threshold: f64,
        t: f64,
    },

    #[error("driving amplitude vanishes at t = {t}: |Omega| = {magnitude:e}")]
    DrivingZero { t: f64, magnitude: f64 },

    #[error("group parameterization singular at t = {t}: |g| = {magnitude:e} <= {eps:e}")]
    ParameterizationSingular { t: f64, magnitude: f64, eps: f64 },

    #[error("group pair is not normalized: |g|^2 + |g~|^2 - 1 = {0:e}")]
    NotNormalized(f64),

    #[error("trajectory under-sampled near t = {t}: |dx| = {dx} between samples")]
    UnderSampled { t: f64, dx: f64 },

    #[error("lyapunov exponent must be positive for a finite predictability time (got {0})")]
    NonPositiveLyapunov(f64),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),
}

impl SimError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        SimError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors raised while integrating, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            SimError::StepSizeUnderflow { .. }
                | SimError::TooManySteps(_)
                | SimError::InvariantDrift { .. }
                | SimError::DrivingZero { .. }
                | SimError::ParameterizationSingular { .. }
                | SimError::UnderSampled { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
