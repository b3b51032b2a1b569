use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),
    #[error("skeleton mismatch: {0}")]
    SkeletonMismatch(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bad magic {0:?}, expected \"PAFT\"")]
    BadMagic([u8; 4]),
    #[error("unsupported tensor format version {0}")]
    VersionMismatch(u16),
    #[error("unsupported tensor dtype {0}")]
    UnsupportedDtype(u8),
    #[error("truncated tensor file: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("trailing bytes after tensor payload: {0}")]
    TrailingBytes(usize),

    #[error("degenerate limb candidate pair (coincident endpoints)")]
    DegeneratePair,
    #[error("unknown candidate id {0}")]
    DanglingCandidate(usize),
    #[error("no visible joints")]
    NoVisibleJoints,
    #[error("scene placement infeasible after {0} attempts")]
    PlacementInfeasible(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
