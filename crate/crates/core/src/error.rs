use thiserror::Error;

/// Error type shared by every subsystem of the crate.
#[derive(Debug, Error)]
pub enum EsnError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("reservoir matrix is degenerate: |lambda_max| <= {0:e}")]
    DegenerateReservoir(f64),
    #[error("non-finite reservoir state or output at step {step}")]
    NonFiniteState { step: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("washout {washout} must be smaller than the sequence length {len}")]
    WashoutTooLarge { washout: usize, len: usize },
    #[error("normal-equations system is numerically singular (condition estimate {cond:.3e})")]
    SingularSystem { cond: f64 },
    #[error("free-run prediction requires an output-to-reservoir feedback path")]
    FreeRunWithoutFeedback,
    #[error("classification group is empty")]
    EmptyGroup,
    #[error("sequence length {len} is too short (minimum {min})")]
    LengthTooShort { len: usize, min: usize },
    #[error("sequence generator diverged after {0} regeneration attempts")]
    GeneratorDiverged(usize),
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("unknown class label {0}")]
    UnknownLabel(i64),
    #[error("invalid split fractions: train={train}, test={test}")]
    InvalidFractions { train: f64, test: f64 },
    #[error("empty input")]
    EmptyInput,
    #[error("actual series has zero variance; R2 is undefined")]
    ZeroVariance,
    #[error("AUC undefined: every class lacks positives or negatives")]
    SingleClassOnly,
    #[error("need at least {min} values, got {got}")]
    TooFewValues { min: usize, got: usize },
    #[error("times must be strictly positive for a log-log fit")]
    NonPositiveTime,
    #[error("all {0} seeded instantiations of the trial failed")]
    AllSeedsFailed(usize),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error("I/O failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization failure: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("CSV failure: {0}")]
    Csv(#[from] csv::Error),
}

impl From<ndarray_linalg::error::LinalgError> for EsnError {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        EsnError::Linalg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, EsnError>;
