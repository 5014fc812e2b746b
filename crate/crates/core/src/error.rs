use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Variants fall into two families: data problems (bad files, misaligned
/// inputs, violated preconditions) and numerical failures (solver
/// non-convergence, non-finite intermediate values). [`Error::is_numerical`]
/// tells them apart so callers can map them to different exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: invalid JSON: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("bad magic {found:?}, expected \"FMAT\"")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported feature file version {found} (expected 1)")]
    VersionMismatch { found: u32 },

    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },

    #[error("trailing bytes after payload: expected {expected} bytes, found {actual}")]
    TrailingBytes { expected: u64, actual: u64 },

    #[error("unknown unit kind code {0}")]
    InvalidUnitKind(u8),

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("invalid video index: {0}")]
    InvalidIndex(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("class count mismatch: expected {expected}, found {found}")]
    ClassCountMismatch { expected: usize, found: usize },

    #[error("class names do not match manifest order: {0}")]
    ClassNameMismatch(String),

    #[error("{}:{line}: {message}", path.display())]
    Csv {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("checksum mismatch for {}", path.display())]
    ChecksumMismatch { path: PathBuf },

    #[error("inputs are not aligned: {0}")]
    Misaligned(String),

    #[error("unknown video id {0:?}")]
    UnknownVideo(String),

    #[error("video {0:?} has no ground-truth label")]
    MissingLabel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("video {0:?} has no action proposals; use uniform sampling instead")]
    NoProposals(String),

    #[error("cannot L1-normalize a zero vector")]
    ZeroVector,

    #[error("requested {requested} principal components but at most {max} are available")]
    PcaRankTooLarge { requested: usize, max: usize },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("need at least {needed} points for {needed} centers, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("training data contains a single class")]
    SingleClass,

    #[error("class {0:?} has no training examples")]
    MissingClass(String),

    #[error("infeasible accuracy target {target} for {classes} classes (must lie in [1/K, 1])")]
    InfeasibleTarget { target: f64, classes: usize },

    #[error("unknown stream {0:?}")]
    UnknownStream(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}
