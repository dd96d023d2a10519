use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("rejected input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numeric overflow: {0}")]
    NumericOverflow(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error("line {line}: {message}")]
    Record { line: usize, message: String },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("degenerate test: {0}")]
    DegenerateTest(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Errors raised while decoding a binary network container.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("version mismatch: expected magic {expected:?}, found {found:?}")]
    VersionMismatch { expected: String, found: String },

    #[error("truncated stream: needed {needed} bytes, got {available}")]
    Truncated { needed: usize, available: usize },

    #[error("inconsistent header: {0}")]
    InconsistentHeader(String),
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Parameter,
    Data,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter(_) => ErrorKind::Parameter,
            Error::NumericOverflow(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}
