use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid universe: {0}")]
    InvalidUniverse(String),

    #[error("state count {states} exceeds cap {cap}")]
    StateCapExceeded { states: u128, cap: usize },

    #[error("database index {index} out of range for {states} states")]
    IndexOutOfRange { index: usize, states: usize },

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("universe mismatch: {left} vs {right}")]
    SpecMismatch { left: String, right: String },

    #[error("prior lacks full support (state {state} has zero mass)")]
    NoFullSupport { state: usize },

    #[error("mechanism infeasible at eps={eps}: {reason}")]
    Infeasible { eps: f64, reason: String },

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("solver did not converge: {0}")]
    NotConverged(String),

    #[error("parse error: {0}")]
    Parse(String),
}
