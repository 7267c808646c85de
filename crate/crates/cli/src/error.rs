use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid plan: {field}{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Validation {
        field: String,
        line: Option<usize>,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Engine(#[from] otoc_scaling::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for a failure of this kind.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => 1,
            _ => 2,
        }
    }
}
