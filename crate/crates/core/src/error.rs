use thiserror::Error;

use crate::scheme::ConstraintKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("grid under-resolved for h = {h}: max |xi| = {max_xi:.3}, need {needed:.3}; use N_g >= {required_points}")]
    UnderResolved {
        h: f64,
        max_xi: f64,
        needed: f64,
        required_points: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{kind} violated: value {value:.6e} exceeds bound {bound:.6e}")]
    Constraint {
        kind: ConstraintKind,
        value: f64,
        bound: f64,
    },

    #[error("Neumann series did not reach tolerance within {terms} terms (last term ratio {ratio:.3e})")]
    NeumannDiverged { terms: usize, ratio: f64 },

    #[error("weight budget exhausted: tau - a t = {remaining:.3e} < 0")]
    WeightBudget { remaining: f64 },

    #[error("weight multiplier overflows f64 (max exponent {max_exponent:.1}); use the log-space path")]
    WeightOverflow { max_exponent: f64 },

    #[error("matrix is not Hurwitz (spectral abscissa {abscissa:.3e})")]
    NotHurwitz { abscissa: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("x-derivative of order {order} unavailable for model `{model}`")]
    DerivativeUnsupported { model: String, order: usize },

    #[error("unknown model {0}")]
    UnknownModel(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
