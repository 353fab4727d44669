use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integration diverged at option index {option}")]
    OpinionDiverged { option: usize },

    #[error("attention integration diverged (value {value})")]
    AttentionDiverged { value: f64 },

    #[error("no active behavior: all weights are zero")]
    NoActiveBehavior,

    #[error("degenerate goal: waypoint coincides with own position")]
    DegenerateGoal,

    #[error("malformed message: {0}")]
    MalformedMessage(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("episode with seed {seed} failed: {source}")]
    EpisodeFailed {
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
