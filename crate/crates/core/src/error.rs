use thiserror::Error;

use crate::spaces::SpaceKind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("weights must be positive and sum to 1 (weights sum = {sum})")]
    InvalidWeights { sum: f64 },

    #[error("symbol {symbol} outside alphabet 1..={k}")]
    InvalidSymbol { symbol: u32, k: usize },

    #[error("index {index} out of range (length {len})")]
    OutOfRange { index: usize, len: usize },

    #[error("construction needs {required} elements, cap is {cap}")]
    TooLarge { required: u128, cap: usize },

    #[error("epsilon-net for resolution {epsilon} needs {required} nodes, cap is {cap}")]
    TooFine { epsilon: f64, required: u128, cap: usize },

    #[error("space mismatch: expected {expected:?}, found {found:?}")]
    SpaceMismatch { expected: SpaceKind, found: SpaceKind },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point {0} is outside the image of a non-surjective map")]
    NotInvertible(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
