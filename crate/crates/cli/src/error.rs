use std::path::PathBuf;

use aelt_core::Stage;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("hypotheses failed: {}", .0.join(", "))]
    Hypotheses(Vec<String>),
    #[error("solver failed at {stage:?}: {message} (trace: {})", trace.as_ref().map_or("none".into(), |p| p.display().to_string()))]
    Solver {
        stage: Option<Stage>,
        message: String,
        trace: Option<PathBuf>,
    },
    #[error(transparent)]
    Core(#[from] aelt_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver { .. } => 3,
            CliError::Hypotheses(_) => 4,
            CliError::Core(_) | CliError::Io { .. } | CliError::Json(_) => 1,
        }
    }
}
