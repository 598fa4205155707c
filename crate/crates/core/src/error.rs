//! Error type shared across the crate, with the process exit-code protocol
//! used by the `slda` binary and the C API.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("expected {expected} responses, found {found}")]
    ResponseCountMismatch { expected: usize, found: usize },

    #[error("document {doc} has fewer than 3 words (m = {m})")]
    DocumentTooShort { doc: usize, m: u64 },

    #[error(
        "rank deficient: reduce k (requested k = {requested_k}, eigenvalue {sigma_k:.3e} \
         vs largest {sigma_max:.3e})"
    )]
    RankDeficient {
        requested_k: usize,
        sigma_k: f64,
        sigma_max: f64,
    },

    #[error(
        "negative eigenvalue: whitened tensor not decomposable at this k \
         (round {round}, lambda = {lambda:.6e})"
    )]
    NegativeEigenvalue { round: usize, lambda: f64 },

    #[error("unsupported model file version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },
}

impl Error {
    /// Exit code used by the command-line front end and the C API.
    ///
    /// 0 = success, 2 = usage, 10 = rank deficiency, 11 = negative
    /// eigenvalue, 12 = i/o or parse failure, 1 = anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::RankDeficient { .. } => 10,
            Error::NegativeEigenvalue { .. } => 11,
            Error::Io { .. } | Error::Parse { .. } => 12,
            Error::InvalidConfig(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
