use thiserror::Error;

/// Errors raised by the objective calculators and trainers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("entry {index} is negative or not finite ({value})")]
    InvalidEntry { index: usize, value: f64 },

    #[error("probabilities sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },

    #[error("column {column} sums to {sum}, expected 1")]
    ColumnNotNormalized { column: usize, sum: f64 },

    #[error("empty alphabet")]
    EmptyAlphabet,

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("model assigns zero probability to symbol {index} which the source emits")]
    SupportMismatch { index: usize },

    #[error("output symbol {index} has zero marginal probability")]
    ZeroMarginal { index: usize },

    #[error("joint table of {cells} cells exceeds the cap of {cap}")]
    CapExceeded { cells: usize, cap: usize },

    #[error("code index {index} has zero responsibility")]
    DeadCode { index: usize },

    #[error("forward matrix {layer} column {column} is not an indicator")]
    NotDeterministic { layer: usize, column: usize },

    #[error("recognition model {k} has zero normalizer")]
    DeadModel { k: usize },

    #[error("posterior evidence vanishes")]
    ZeroEvidence,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
