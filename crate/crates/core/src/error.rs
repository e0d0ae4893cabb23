use thiserror::Error;

use crate::experiments::RunLog;
use crate::plant::PlantState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("simulation diverged at t={:.3} s (last finite state x={}, y={})", .last.t, .last.x, .last.y)]
    Diverged { last: PlantState },

    /// A run diverged after producing some output; the partial log is kept.
    #[error("run diverged at t={:.3} s after {} logged samples", .last.t, .partial.len())]
    RunDiverged {
        last: PlantState,
        partial: Box<RunLog>,
    },

    #[error("degenerate least-squares problem: {reason} (rank {rank}, condition estimate {condition:e})")]
    Degenerate {
        reason: String,
        rank: usize,
        condition: f64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("model file error on line {line}: {msg}")]
    ModelFormat { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
