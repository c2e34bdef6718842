use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("line {line}: {reason}")]
    Ingest { line: usize, reason: String },

    #[error("edge stream is empty")]
    EmptyStream,

    #[error("graph is empty after filtering")]
    EmptyGraph,

    #[error("user {0} has no incident edges")]
    DegenerateUser(usize),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("negative sampler needs at least 2 items with nonzero degree, found {0}")]
    SamplerUnderflow(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("corrupt file: {0}")]
    CorruptFile(String),

    #[error("unsupported format version {found}, expected {expected}")]
    Version { found: u8, expected: u8 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("exact loss needs |E|*T = {0} evaluations, above the 1e8 limit")]
    DiagnosticTooLarge(u128),

    #[error("degenerate split: {0}")]
    SplitDegenerate(String),

    #[error("unknown vertex key {0}")]
    MissingKey(String),

    #[error("unknown id {0:?}")]
    UnknownId(String),

    #[error("non-finite embedding entry after epoch {0}")]
    NonFinite(usize),
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by malformed or unsuitable input data.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Ingest { .. }
                | Error::EmptyStream
                | Error::EmptyGraph
                | Error::DegenerateUser(_)
                | Error::InvalidWeights(_)
                | Error::SamplerUnderflow(_)
                | Error::CorruptFile(_)
                | Error::Version { .. }
                | Error::DimensionMismatch(_)
                | Error::SplitDegenerate(_)
                | Error::UnknownId(_)
        )
    }
}
