use thiserror::Error;

/// Errors produced by the numerical kernels, optimizers and diagnostics.
#[derive(Debug, Error)]
pub enum SpectraError {
    #[error("dimension mismatch in {op}: {left} vs {right}")]
    DimensionMismatch { op: &'static str, left: String, right: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("{algorithm} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { algorithm: &'static str, iterations: usize, residual: f64 },

    #[error("rank {rank} leaves no tail directions for a {rows}x{cols} matrix; use a smaller rank_ratio")]
    EmptyTail { rank: usize, rows: usize, cols: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("truncated input at byte offset {offset}: expected {expected} more bytes")]
    Truncated { offset: u64, expected: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = SpectraError> = std::result::Result<T, E>;

pub(crate) fn shape(rows: usize, cols: usize) -> String {
    format!("{rows}x{cols}")
}
