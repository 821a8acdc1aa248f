use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("IPF did not converge after {iterations} sweeps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("category '{category}' of dimension '{dimension}' has positive target but zero seed weight")]
    EmptyCategory { dimension: String, category: String },
    #[error("category '{category}' of dimension '{dimension}' is not listed in the marginal targets")]
    UnknownCategory { dimension: String, category: String },
    #[error("no donor record carries a value for attribute '{0}'")]
    NoDonor(String),
    #[error("invalid prior for '{attribute}': {reason}")]
    InvalidPrior { attribute: String, reason: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("trend needs at least {needed} policy vectors, have {have}")]
    InsufficientHistory { needed: usize, have: usize },
    #[error("policy coordinate '{name}' = {value} outside [{lower}, {upper}]")]
    OutOfBounds {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("cycle within a time slice: {}", .0.join(" -> "))]
    CycleDetected(Vec<String>),
    #[error("edge references undeclared variable '{0}'")]
    UnknownVariable(String),
    #[error("non-finite aggregate at step {step}")]
    NumericOverflow { step: usize },
    #[error("window {window} longer than series of length {len}")]
    WindowTooLong { window: usize, len: usize },
    #[error("block length {block} exceeds series length {len}")]
    BlockTooLong { block: usize, len: usize },
    #[error("series of length {len} is shorter than the required {min}")]
    SeriesTooShort { len: usize, min: usize },
    #[error("design of {points} points exceeds the cap of {cap}")]
    TooManyPoints { points: usize, cap: usize },
    #[error("schema error at '{path}': {reason}")]
    SchemaError { path: String, reason: String },
    #[error("replication {replication}: {source}")]
    Replication {
        replication: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("evaluation failed in trajectory {trajectory}, step {step}: {source}")]
    Evaluation {
        trajectory: usize,
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable variant name, printed by the command-line front end.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NonConvergence { .. } => "NonConvergence",
            Error::EmptyCategory { .. } => "EmptyCategory",
            Error::UnknownCategory { .. } => "UnknownCategory",
            Error::NoDonor(_) => "NoDonor",
            Error::InvalidPrior { .. } => "InvalidPrior",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InsufficientHistory { .. } => "InsufficientHistory",
            Error::OutOfBounds { .. } => "OutOfBounds",
            Error::CycleDetected(_) => "CycleDetected",
            Error::UnknownVariable(_) => "UnknownVariable",
            Error::NumericOverflow { .. } => "NumericOverflow",
            Error::WindowTooLong { .. } => "WindowTooLong",
            Error::BlockTooLong { .. } => "BlockTooLong",
            Error::SeriesTooShort { .. } => "SeriesTooShort",
            Error::TooManyPoints { .. } => "TooManyPoints",
            Error::SchemaError { .. } => "SchemaError",
            Error::Replication { source, .. } | Error::Evaluation { source, .. } => source.name(),
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::FileNotFound(_) => "FileNotFound",
            Error::Io(_) => "Io",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
        }
    }

    pub(crate) fn schema(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::SchemaError {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
