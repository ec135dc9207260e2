use thiserror::Error;

pub type Result<T> = std::result::Result<T, ArgusError>;

#[derive(Debug, Error)]
pub enum ArgusError {
    #[error("line {line}: parse error: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: {message}")]
    InvalidRecord { line: usize, message: String },

    #[error("line {line}: duplicate key {key}")]
    DuplicateKey { line: usize, key: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("training diverged (learning rate {learning_rate}): {message}")]
    Divergence { learning_rate: f64, message: String },

    #[error("design matrix is rank deficient; collinear columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("perfect separation detected on {}", columns.join(", "))]
    Separation { columns: Vec<String> },

    #[error("no convergence after {iterations} iterations; trace: {trace:?}")]
    NonConvergence { iterations: usize, trace: Vec<f64> },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ArgusError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        ArgusError::Invalid(msg.into())
    }

    pub fn degenerate(msg: impl Into<String>) -> Self {
        ArgusError::Degenerate(msg.into())
    }

    /// True for failures of a numerical procedure on otherwise valid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            ArgusError::Divergence { .. }
                | ArgusError::RankDeficient { .. }
                | ArgusError::Separation { .. }
                | ArgusError::NonConvergence { .. }
                | ArgusError::Numerical(_)
                | ArgusError::Degenerate(_)
        )
    }
}
