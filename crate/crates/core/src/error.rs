use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid map dimensions {width}x{height} for {len} values")]
    InvalidDimensions {
        width: usize,
        height: usize,
        len: usize,
    },
    #[error("map contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("map contains a negative value at index {0}")]
    NegativeValue(usize),
    #[error("map sums to zero and cannot be turned into a distribution")]
    AllZeroMap,
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: PathBuf, reason: String },
    #[error("fixation ({x}, {y}) lies outside a {width}x{height} image")]
    OutOfBounds {
        x: i64,
        y: i64,
        width: usize,
        height: usize,
    },
    #[error("fixation set is empty")]
    EmptyFixations,
    #[error("map has zero variance")]
    ZeroVariance,
    #[error("insufficient negatives: needed {needed}, pool has {available}")]
    InsufficientNegatives { needed: usize, available: usize },
    #[error("EMD grid resolution {requested} exceeds the exact-solver bound {max}")]
    ResolutionTooLarge { requested: usize, max: usize },
    #[error("question {0} has no answers")]
    NoAnswers(u64),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("group size {t} needs {needed} subjects, dataset has {available}")]
    GroupTooLarge {
        t: usize,
        needed: usize,
        available: usize,
    },
    #[error("missing metric scores for question {0}")]
    MissingScores(u64),
    #[error("total confidence of the dataset is zero")]
    ZeroTotalConfidence,
    #[error("no scores to rank")]
    EmptyScores,
    #[error("rankings cover different model sets")]
    ModelSetMismatch,
    #[error("empty input")]
    EmptyInput,
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn malformed(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::MalformedFile {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
