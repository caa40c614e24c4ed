use std::io;

use thiserror::Error;

/// Errors raised while reading text, building, or querying an index.
#[derive(Debug, Error)]
pub enum EraError {
    #[error("invalid symbol 0x{symbol:02x}{}", offset.map(|o| format!(" at offset {o}")).unwrap_or_default())]
    InvalidSymbol { symbol: u8, offset: Option<u64> },

    #[error("sentinel found at interior offset {offset}")]
    DuplicateSentinel { offset: u64 },

    #[error("position {pos} is past the end of the text (n + 1 = {len})")]
    OutOfRange { pos: u64, len: u64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("memory budget too small: {0}")]
    BudgetTooSmall(String),

    #[error("invalid branch record B[{index}]: {reason}")]
    InvalidBranch { index: usize, reason: String },

    #[error("occurrence list inconsistent with prefix: {0}")]
    Consistency(String),

    #[error("unsupported index format: {0}")]
    UnsupportedFormat(String),

    #[error("corrupt index: {0}")]
    CorruptIndex(String),

    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = EraError> = std::result::Result<T, E>;
