use std::path::PathBuf;

use spectra_core::SpectraError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    /// One message per offending field, each prefixed with its path.
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("property check failed: {0}")]
    Property(String),

    #[error("output directory {0} already exists (pass --force to overwrite)")]
    OutputExists(PathBuf),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] SpectraError),
}

impl LabError {
    pub fn config(msg: impl Into<String>) -> Self {
        LabError::Config(vec![msg.into()])
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        LabError::Io { context: context.into(), source }
    }

    /// Process exit code: 1 config, 2 failed property or numerical check,
    /// 3 I/O (including unreadable checkpoints).
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 1,
            LabError::Property(_) => 2,
            LabError::OutputExists(_) | LabError::Io { .. } => 3,
            LabError::Core(e) => match e {
                SpectraError::InvalidArgument(_)
                | SpectraError::DimensionMismatch { .. }
                | SpectraError::EmptyTail { .. } => 1,
                SpectraError::Io(_)
                | SpectraError::Json(_)
                | SpectraError::Format(_)
                | SpectraError::Truncated { .. } => 3,
                SpectraError::NonFinite(_) | SpectraError::NoConvergence { .. } | SpectraError::Degenerate(_) => 2,
            },
        }
    }
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
