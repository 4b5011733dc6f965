use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("kernel matrix is singular even with jitter {max_jitter:e}")]
    SurrogateSingular { max_jitter: f64 },

    #[error("all {restarts} fit restarts failed; last error: {last}")]
    FitFailure { restarts: usize, last: String },

    #[error("benchmark evaluation failed: {message}")]
    BenchmarkEvaluation { message: String, output: String },

    #[error("benchmark conditioning failed at query {query_index}: covariance is singular")]
    BenchmarkSingular { query_index: usize },

    #[error("unsupported analysis: {0}")]
    UnsupportedAnalysis(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed trace {path} line {line}: {message}")]
    TraceFormat { path: String, line: usize, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}
