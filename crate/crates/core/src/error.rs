use std::error::Error as StdError;
use std::fmt;
use std::sync::Arc;

pub type BoxError = Box<dyn StdError + Send + Sync>;

/// A task failure that retrying cannot fix: a user function returned an
/// error or panicked.
#[derive(Debug, Clone)]
pub struct JobError {
    pub partition: usize,
    pub cause: Arc<dyn StdError + Send + Sync>,
}

impl JobError {
    /// The underlying error, if it has type `E`.
    pub fn downcast_ref<E: StdError + 'static>(&self) -> Option<&E> {
        self.cause.downcast_ref::<E>()
    }
}

impl fmt::Display for JobError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "task for partition {} failed: {}",
            self.partition, self.cause
        )
    }
}

impl StdError for JobError {
    fn source(&self) -> Option<&(dyn StdError + 'static)> {
        Some(&*self.cause)
    }
}

/// A plain-text error for user functions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message(pub String);

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl StdError for Message {}

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("invalid partition count {0}")]
    InvalidPartitionCount(usize),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("column `{column}` has type {actual}, expected {expected}")]
    ColumnType {
        column: String,
        expected: String,
        actual: String,
    },
    #[error("column `{0}` cannot be used as a shuffle key")]
    UnhashableKey(String),
    #[error(transparent)]
    Job(#[from] JobError),
    #[error("worker count {requested} outside [{min}, {max}]")]
    OutOfBounds {
        requested: usize,
        min: usize,
        max: usize,
    },
    #[error("invalid engine configuration: {0}")]
    InvalidConfig(String),
    #[error("no job has run yet")]
    NoJobYet,
    #[error("unknown stage `{0}`")]
    UnknownStageName(String),
    #[error("stage `{0}` registered twice")]
    DuplicateStage(String),
    #[error("stage `{stage}` has no parameter `{param}`")]
    UnknownParam { stage: String, param: String },
    #[error("parameter `{param}` expects {expected}")]
    ParamType { param: String, expected: String },
    #[error("stage `{stage}` requires parameter `{param}`")]
    MissingParam { stage: String, param: String },
    #[error("invalid value for `{param}`: {reason}")]
    InvalidParam { param: String, reason: String },
    #[error("corrupt stage file: {0}")]
    CorruptStageFile(String),
    #[error("invalid pipeline: {0}")]
    InvalidPipeline(String),
    #[error("stage {index} (`{stage}`) failed: {source}")]
    Stage {
        index: usize,
        stage: String,
        source: Box<Error>,
    },
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("expected vectors of length {expected}, got {actual}")]
    VectorSizeMismatch { expected: usize, actual: usize },
    #[error("feature dimension {actual} does not match {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("label {0} is not 0 or 1")]
    NonBinaryLabel(f64),
    #[error("labels contain a single class")]
    DegenerateLabels,
    #[error("column `{column}` has vectors of differing lengths ({first} and {other})")]
    RaggedVector {
        column: String,
        first: usize,
        other: usize,
    },
    #[error("model error: {0}")]
    Model(String),
    #[error("line {line}: {reason}")]
    Interchange { line: usize, reason: String },
    #[error("{0}")]
    Invalid(String),
    #[error("i/o error: {0}")]
    Io(Arc<std::io::Error>),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(Arc::new(e))
    }
}

impl Error {
    /// The job failure inside this error, looking through stage wrappers.
    pub fn job_error(&self) -> Option<&JobError> {
        match self {
            Error::Job(j) => Some(j),
            Error::Stage { source, .. } => source.job_error(),
            _ => None,
        }
    }
}
