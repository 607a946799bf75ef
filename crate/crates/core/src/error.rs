use thiserror::Error;

/// Errors raised by the simulator and the trainer.
#[derive(Debug, Error)]
pub enum CcoError {
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("invalid channel parameters: {0}")]
    Channel(String),
    #[error("invalid STAR-RIS state: {0}")]
    RisState(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("action out of range: {0}")]
    Action(String),
    #[error("invariant violated after step: {0}")]
    Invariant(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, CcoError>;
