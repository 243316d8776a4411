use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown search space preset `{name}` (valid: {})", valid.join(", "))]
    UnknownPreset { name: String, valid: Vec<&'static str> },

    #[error("invalid architecture: {}", .0.join("; "))]
    InvalidArch(Vec<String>),

    #[error("requested {requested} unique architectures but the space only holds {available}")]
    CountExceedsCardinality { requested: usize, available: String },

    #[error("no published power-law coefficients for space `{0}`")]
    NoCoefficients(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("too few records: need at least {needed}, found {found}")]
    TooFewRecords { needed: usize, found: usize },

    #[error("record {index} carries {found} {metric} observations on `{device}`; at least 2 are required")]
    InsufficientObservations {
        index: usize,
        device: String,
        metric: String,
        found: usize,
    },

    #[error("predicted standard deviation at index {index} is not strictly positive")]
    NonPositiveStd { index: usize },

    #[error("design matrix is rank deficient; dependent columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("target at index {index} is not strictly positive")]
    NonPositiveTarget { index: usize },

    #[error("covariance factorization failed even with jitter {jitter:e}")]
    CovarianceFactorization { jitter: f64 },

    #[error("unknown metric `{0}`")]
    UnknownMetric(String),

    #[error("unknown device `{0}`")]
    UnknownDevice(String),

    #[error("unknown method `{name}` (supported: {})", supported.join(", "))]
    UnknownMethod { name: String, supported: Vec<&'static str> },

    #[error("no architecture set; call set_arch first")]
    NoArchSet,

    #[error("surrogate not fitted for {0}")]
    SurrogateNotFitted(String),

    #[error("stratum `{0}` is empty")]
    EmptyStratum(String),

    #[error("unsupported document version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("architecture is not in the frozen dataset")]
    NotInDataset,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
