use thiserror::Error;

use crate::Side;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("weight is not positive at t = {t:e} (value {value:e})")]
    NonPositiveWeight { t: f64, value: f64 },

    #[error("weight underflow at t = {t:e}")]
    WeightUnderflow { t: f64 },

    #[error("non-finite integrand value at t = {t:e}")]
    NonFinite { t: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Omega undefined: weight not B_p({side})")]
    NotBp { side: Side },

    #[error("{side} endpoint value undefined: weight not B_p({side}) (sharpness: no trace operator exists)")]
    TraceUndefined { side: Side },

    #[error("{0} undetermined: quadrature inconclusive")]
    Undetermined(&'static str),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("descent did not converge: gradient norm {gradient_norm:e} after {iterations} iterations")]
    DescentNotConverged {
        gradient_norm: f64,
        iterations: usize,
    },

    #[error("function is not constant beyond the cut point (derivative {value:e} at t = {t:e})")]
    NotConstantBeyondCut { t: f64, value: f64 },

    #[error("{0} undefined: integral diverges")]
    TransformUndefined(&'static str),

    #[error("refusing: {0}")]
    Refused(String),

    #[error("json: {0}")]
    Json(String),
}

impl Error {
    /// Stable short code for machine-readable error lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "E_SYNTAX",
            Error::NonPositiveWeight { .. } => "E_WEIGHT_NONPOSITIVE",
            Error::WeightUnderflow { .. } => "E_WEIGHT_UNDERFLOW",
            Error::NonFinite { .. } => "E_NONFINITE",
            Error::InvalidArgument(_) => "E_ARGUMENT",
            Error::NotBp { .. } => "E_NOT_BP",
            Error::TraceUndefined { .. } => "E_TRACE_UNDEFINED",
            Error::Undetermined(_) => "E_UNDETERMINED",
            Error::Quadrature(_) => "E_QUADRATURE",
            Error::DescentNotConverged { .. } => "E_DESCENT",
            Error::NotConstantBeyondCut { .. } => "E_NOT_CONSTANT",
            Error::TransformUndefined(_) => "E_TRANSFORM_UNDEFINED",
            Error::Refused(_) => "E_REFUSED",
            Error::Json(_) => "E_JSON",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
