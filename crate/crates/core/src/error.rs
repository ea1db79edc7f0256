use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {reason}")]
    Parse { line: u64, reason: String },

    #[error("line {line}: query {query_id} has {got} features, expected {expected}")]
    FeatureDim {
        line: u64,
        query_id: String,
        expected: usize,
        got: usize,
    },

    #[error("{} validation failure(s):\n{}", .0.len(), .0.join("\n"))]
    Validation(Vec<String>),

    #[error("invalid session {query_id}: {reason}")]
    InvalidSession { query_id: String, reason: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("model artifact: {0}")]
    Artifact(String),

    #[error("feature dimension mismatch: model expects {model}, data has {data}")]
    ModelDim { model: usize, data: usize },

    #[error("synthetic corpus rejected: {0}")]
    Synthetic(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
