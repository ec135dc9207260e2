use argus_core::ArgusError;
use argus_llmprobe::ProbeError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] ArgusError),

    #[error(transparent)]
    Probe(#[from] ProbeError),

    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    /// 2 for numerical failures, 1 for everything the user can fix.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
