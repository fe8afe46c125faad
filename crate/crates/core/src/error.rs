use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("layout needs {needed} interior cells but only {available} exist")]
    LayoutOverflow { needed: usize, available: usize },

    #[error("episode already finished at tick {tick}")]
    StepAfterEnd { tick: u32 },

    #[error("unknown agent {0}")]
    UnknownAgent(usize),

    #[error("expected {expected} actions, got {got}")]
    ActionCount { expected: usize, got: usize },

    #[error("unknown environment `{0}`")]
    UnknownEnv(String),

    #[error("unknown policy `{0}`")]
    UnknownPolicy(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("no episodes to aggregate")]
    EmptyInput,

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("report encoding failed: {0}")]
    Encode(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
