use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("invalid UTF-8 in input near byte {offset}")]
    Encoding { offset: u64 },

    #[error("capacity must be at least 1")]
    ZeroCapacity,

    #[error("words must be non-empty")]
    EmptyWord,

    #[error("cannot draw from an empty reservoir")]
    EmptyReservoir,

    #[error("slot {slot} out of range for a table with {rows} rows")]
    SlotOutOfRange { slot: usize, rows: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("vocabulary is empty")]
    EmptyVocab,

    #[error("invalid rank interval {lo}..={hi} for {len} ranked words")]
    InvalidInterval { lo: usize, hi: usize, len: usize },

    #[error("unknown word: {0}")]
    UnknownWord(String),

    #[error("not a checkpoint file (bad magic bytes)")]
    BadMagic,

    #[error("unsupported checkpoint version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("corrupt data: {0}")]
    Corrupt(String),
}

impl Error {
    pub(crate) fn corrupt(msg: impl Into<String>) -> Self {
        Error::Corrupt(msg.into())
    }
}
