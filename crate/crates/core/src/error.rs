use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vector norm {norm:e} is too small to normalize")]
    ZeroVector { norm: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite component at index {index}")]
    NonFinite { index: usize },

    #[error("classes {i} and {j} have identical weight vectors")]
    DegeneratePair { i: u32, j: u32 },

    #[error("label {value} outside 1..={k}")]
    InvalidLabel { value: i64, k: u32 },

    #[error("{0} is undefined for this configuration")]
    Undefined(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("rejection sampling accepted {accepted} of {wanted} samples within {draws} draws")]
    AcceptanceStarvation {
        wanted: usize,
        accepted: usize,
        draws: usize,
    },

    #[error("boundary-flip calibration failed: band mass {mass:e} below 1e-6")]
    CalibrationFailure { mass: f64 },

    #[error("finite source exhausted after {available} examples ({requested} requested)")]
    InsufficientSamples { requested: usize, available: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("no candidate hypotheses")]
    EmptyCandidates,

    #[error("invalid geometry guess: {0}")]
    InvalidGeometryGuess(String),

    #[error("vector not orthogonal to the current iterate (|<g, w>| = {residual:e})")]
    OrthogonalityViolation { residual: f64 },

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("sources differ: {0}")]
    MismatchedSources(String),

    #[error("pair ({i}, {j}): {source}")]
    Pair {
        i: u32,
        j: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("format error in {path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_pair(self, i: u32, j: u32) -> Self {
        Error::Pair {
            i,
            j,
            source: Box::new(self),
        }
    }
}
