use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("detection failure: {0}")]
    Detection(String),

    #[error("unsupported modulus {0}: must be odd, at least 3 and below 2^32")]
    UnsupportedModulus(u128),

    #[error("negative value {0} has no binary digit expansion")]
    NegativeValue(i128),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("runtime error at step {step} ({instr}): {msg}")]
    Runtime {
        step: usize,
        instr: String,
        msg: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
