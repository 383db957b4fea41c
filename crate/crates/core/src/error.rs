use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("header does not match schema: {0}")]
    HeaderMismatch(String),
    #[error("row {row} has {found} cells, expected {expected}")]
    RowLength {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("column `{column}`: {reason}")]
    Column { column: String, reason: String },
    #[error("unseen category `{value}` in column `{column}`")]
    UnseenCategory { column: String, value: String },
    #[error("target value {0} is not positive; log1p transform requires y > 0")]
    NonPositiveTarget(f64),
    #[error("split leaves an empty partition (n = {n}, test fraction = {fraction})")]
    EmptyPartition { n: usize, fraction: f64 },
    #[error("undefined metric: {0}")]
    UndefinedMetric(&'static str),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("dimension mismatch: expected {expected} features, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("training diverged after {} iterations (non-finite loss)", trace.len())]
    Divergence { trace: Vec<f64> },
    #[error("artifact format version {found} is not supported (expected {expected})")]
    ArtifactVersion { found: u32, expected: u32 },
    #[error("artifact checksum mismatch (file truncated or corrupted)")]
    Checksum,
    #[error("corrupt artifact: {0}")]
    Corrupt(String),
    #[error("schema digest mismatch: artifact {artifact}, supplied {supplied}")]
    SchemaDigest { artifact: String, supplied: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn column(column: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Column {
            column: column.into(),
            reason: reason.into(),
        }
    }

    /// Wraps an error with the pipeline stage that produced it.
    pub fn at_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }
}
