use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside its documented domain.
    #[error("input domain: {0}")]
    InputDomain(String),

    /// A numerical construction failed to reach its target accuracy.
    #[error("construction failed: {msg} (achieved error {achieved:.3e})")]
    Construction { msg: String, achieved: f64 },

    /// A size cap would be exceeded.
    #[error("resource limit: {0}")]
    Resource(String),

    /// A player's loss value left [0, 1].
    #[error("loss contract violated by player {player}: value {value} outside [0, 1]")]
    LossContract { player: usize, value: f64 },

    /// An estimator was asked to work on an empty or degenerate input.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// The recovery program has no feasible point.
    #[error("recovery infeasible: {0}")]
    Infeasible(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::InputDomain(msg.into())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
