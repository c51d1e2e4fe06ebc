use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors are split into two families so the CLI can report distinct exit
/// codes: problems with the inputs a user handed us, and failures of the
/// computation itself.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("{path}: expected {expected} bytes for dims {dims:?}, found {found}")]
    SizeMismatch {
        path: PathBuf,
        dims: [usize; 3],
        expected: u64,
        found: u64,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("dims mismatch: expected {expected:?}, found {found:?}")]
    DimsMismatch {
        expected: [usize; 3],
        found: [usize; 3],
    },

    #[error("non-finite voxel in channel '{channel}' at index {index}")]
    NonFinite { channel: String, index: usize },

    #[error("duplicate channel name '{0}'")]
    DuplicateChannel(String),

    #[error("invalid channel name: {0}")]
    InvalidChannel(String),

    #[error("mask '{0}' has no voxels inside")]
    EmptyMask(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("channel subset {subset:?} invalid for {available} channels")]
    InvalidSubset {
        subset: Vec<usize>,
        available: usize,
    },

    #[error("no qualifying voxel pairs for offset d={d} at {angle}")]
    EmptyCooccurrence { d: usize, angle: String },

    #[error("unknown feature '{0}'")]
    UnknownFeature(String),

    #[error("feature names differ: {0}")]
    FeatureMismatch(String),

    #[error("study mismatch: '{0}' vs '{1}'")]
    StudyMismatch(String, String),

    #[error("unmatched study id '{0}'")]
    UnmatchedStudy(String),

    #[error("only one class present ({0})")]
    SingleClass(String),

    #[error("group too small: {0}")]
    GroupTooSmall(String),

    #[error("malformed feature file {path}: {message}")]
    FeatureFile { path: PathBuf, message: String },

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

    /// True for errors caused by the computation rather than by the inputs.
    pub fn is_computation(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::EmptyCooccurrence { .. })
    }
}
