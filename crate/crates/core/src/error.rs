use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: String,
        constraint: &'static str,
    },

    #[error("grid too coarse: {nodes} nodes, at least {required} required")]
    GridTooCoarse { nodes: usize, required: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("parity mismatch: expected {expected} function")]
    ParityMismatch { expected: &'static str },

    #[error("no sign change found in scan: {0}")]
    NoSignChange(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("did not converge: {0}")]
    NonConvergence(String),

    #[error("singular linear system at pivot {0}")]
    Singular(usize),

    #[error("malformed data: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, value: impl ToString, constraint: &'static str) -> Error {
    Error::InvalidParameter {
        name,
        value: value.to_string(),
        constraint,
    }
}
