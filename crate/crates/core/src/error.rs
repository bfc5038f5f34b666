//! Error type shared across the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("frequency vectors need at least two states, got {0}")]
    TooFewStates(usize),

    #[error("invalid frequency vector: {0}")]
    InvalidFrequency(String),

    #[error("invalid mixture weights: {0}")]
    InvalidWeights(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("operation requires binary states (M = 2), got M = {0}")]
    NotBinary(usize),

    #[error("operation is undefined for relaxed-mode parameters")]
    RelaxedModeUnsupported,

    #[error("operation requires interior-mode parameters, got {0} mode")]
    InteriorRequired(String),

    #[error("size cap exceeded: needs {needed} cells, cap is {cap}")]
    SizeCapExceeded { needed: u128, cap: u64 },

    #[error("state index {state} out of range for M = {states}")]
    StateOutOfRange { state: usize, states: usize },

    #[error("variable index {var} out of range for L = {vars}")]
    VarOutOfRange { var: usize, vars: usize },

    #[error("invalid component permutation: {0}")]
    InvalidPermutation(String),

    #[error("infeasible counterexample specification: {0}")]
    InfeasibleSpec(String),

    #[error("distributions differ; comparison is only defined on equal distributions")]
    DistributionsDiffer,

    #[error("sampling gave up after {attempts} attempts")]
    SamplingExhausted { attempts: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
