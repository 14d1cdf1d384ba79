use std::io;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// Malformed bytes: wrong magic, unknown version, bad tag, trailing data.
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    /// The input ended before a declared payload was complete.
    #[error("truncated input at byte {offset}: expected {expected} more bytes")]
    Truncated { offset: u64, expected: u64 },

    /// A value violates a type invariant. `frame` names the offending frame when known.
    #[error("{}", validation_message(*.frame, .reason))]
    Validation { frame: Option<usize>, reason: String },

    /// Frames disagree with the header or with each other.
    #[error("structural error: {0}")]
    Structure(String),

    /// A caller supplied an out-of-range parameter.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn validation_message(frame: Option<usize>, reason: &str) -> String {
    match frame {
        Some(index) => format!("validation error in frame {index}: {reason}"),
        None => format!("validation error: {reason}"),
    }
}

impl Error {
    pub(crate) fn validation(reason: impl Into<String>) -> Self {
        Error::Validation { frame: None, reason: reason.into() }
    }

    pub(crate) fn frame(index: usize, reason: impl Into<String>) -> Self {
        Error::Validation { frame: Some(index), reason: reason.into() }
    }

    pub(crate) fn invalid(reason: impl Into<String>) -> Self {
        Error::InvalidArgument(reason.into())
    }

    /// Byte offset attached to parse errors, if any.
    pub fn offset(&self) -> Option<u64> {
        match self {
            Error::Format { offset, .. } | Error::Truncated { offset, .. } => Some(*offset),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
