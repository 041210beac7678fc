use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A sequence or matrix did not have the length the operation requires.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A transform length that must be a power of two was not.
    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    /// Invalid system dimensions.
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    /// A surface state vector contained something other than +1/-1.
    #[error("state entry {index} is {value}; every entry must be +1 or -1")]
    InvalidState { index: usize, value: i8 },

    /// A pilot matrix entry was not +1/-1.
    #[error("pilot matrix entry ({row}, {col}) is {value}; entries must be +1 or -1")]
    InvalidPilotEntry { row: usize, col: usize, value: i8 },

    /// The transmitted pilot has a zero bin, so per-bin equalization is impossible.
    #[error("transmit pilot bin {bin} is zero; cannot equalize received blocks")]
    ZeroPilotBin { bin: usize },

    /// Configuration or settings value out of range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The direct path is still folded into element 0, so flipping that
    /// element's state is not predictable from the estimate.
    #[error(
        "direct path is aliased with element 0 (N-column pilot set); \
         element 0 must keep state +1"
    )]
    AliasedElementFlip,

    /// Exhaustive search refused: the configuration space is too large.
    #[error("exhaustive search supports at most {max} elements, got {elements}")]
    SearchSpaceTooLarge { elements: usize, max: usize },

    /// A dataset file is malformed; `offset` is the byte where parsing failed.
    #[error("dataset format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    /// Cross-file or cross-stage contract violation.
    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dimension(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            actual,
        }
    }
}
