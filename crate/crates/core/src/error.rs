use thiserror::Error;

/// Errors raised by instance construction, the simulation protocol and the
/// policies built on top of it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A policy tried to recommend an item that already reached the budget.
    /// Any occurrence of this error is a bug in the calling policy.
    #[error("budget violation: item {item} already recommended {count} times to user {user} (B = {budget})")]
    Budget {
        user: usize,
        item: usize,
        count: u32,
        budget: u32,
    },

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("incomplete trace: user {user} has no recommendation at round {round}")]
    IncompleteTrace { user: usize, round: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Whether the error stems from user input rather than a failed run.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Json(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
