use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("log-density score undefined: {0}")]
    UndefinedScore(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("infeasible equilibrium: {0}")]
    InfeasibleEquilibrium(String),

    #[error("episode aborted at step {step}: {reason}")]
    EpisodeAborted { step: usize, reason: String },

    #[error("training diverged at episode {episode}: {reason}")]
    Divergence {
        episode: usize,
        reason: String,
        last_checkpoint: Option<PathBuf>,
    },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("snapshot error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
