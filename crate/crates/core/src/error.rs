use thiserror::Error;

use crate::multiindex::SignedIndex;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("monomial of degree {degree} (max mode {max_mode}) exceeds truncation (maxMode {limit_mode}, maxDegree {limit_degree})")]
    TruncationOverflow {
        degree: u32,
        max_mode: u32,
        limit_mode: u32,
        limit_degree: u32,
    },

    #[error("operation requires {expected} basis, got {found}")]
    WrongBasis {
        expected: &'static str,
        found: &'static str,
    },

    #[error("truncations differ: {0:?} vs {1:?}")]
    TruncationMismatch(crate::hampoly::Truncation, crate::hampoly::Truncation),

    #[error("missing data for mode {mode} (have {available})")]
    MissingMode { mode: u32, available: usize },

    #[error("key {0} is averaged (l = l') and cannot be divided")]
    AveragedKey(String),

    #[error("input is not averaged: {0}")]
    NotAveraged(String),

    #[error("exact zero divisor for l = {0}")]
    Resonance(SignedIndex),

    #[error("frequency vector is resonant: {0}")]
    Nonresonance(String),

    #[error("enumeration budget exceeded: {count} multi-indices > budget {budget}")]
    EnumerationBudget { count: u128, budget: u128 },

    #[error("Jacobian dominance violated: ||dV~/dV - I|| = {norm:.3e} >= 1/2")]
    JacobianDominance { norm: f64 },

    #[error("Newton iteration did not converge: residual {residual:.3e} after {iterations} iterations")]
    NewtonDiverged { residual: f64, iterations: usize },

    #[error("contraction failure at step {step}: {reason}")]
    Contraction { step: usize, reason: String },

    #[error("implicit solve did not converge at t = {time} (update {update:.3e})")]
    Integrator { time: f64, update: f64 },

    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}
