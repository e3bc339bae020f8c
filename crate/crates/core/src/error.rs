use thiserror::Error;

/// Errors surfaced by the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid action {action} (environment has {num_actions} actions)")]
    InvalidAction { action: usize, num_actions: usize },

    #[error("behavior probability of the taken action is zero")]
    ZeroBehaviorProbability,

    #[error("singular linear system (pivot magnitude {pivot:e})")]
    Singular { pivot: f64 },

    #[error("unknown {kind} id `{id}`")]
    UnknownComponent { kind: &'static str, id: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
