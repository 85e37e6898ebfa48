pub mod da;
pub mod cli;
pub mod corpusgen;
pub mod decoder;
pub mod error;
pub mod evaluator;
pub mod experiment;
pub mod net;
pub mod numkit;
pub mod trainer;
pub mod vocab;

pub use error::{Error, Result};
