use std::path::PathBuf;

use thiserror::Error;

use crate::da::ParseError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("non-finite activation at timestep {timestep} ({what})")]
    NonFinite { timestep: usize, what: &'static str },

    #[error("training diverged at epoch {epoch}, sentence {sentence}")]
    Diverged { epoch: usize, sentence: usize },

    #[error("template `{template}`: {reason}")]
    Template { template: String, reason: String },

    #[error("model format: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
