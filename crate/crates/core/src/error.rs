use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter {name}: {reason} (got {value})")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("parse error at {path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("index {index} out of bounds for graph with {n} nodes ({path}:{line})")]
    Bounds {
        path: PathBuf,
        line: usize,
        index: usize,
        n: usize,
    },

    #[error("numeric failure in {context}: requested tolerance {requested:e}, achieved {achieved:e}")]
    Numeric {
        context: &'static str,
        requested: f64,
        achieved: f64,
    },

    #[error("sampler {context} exceeded {retries} retries")]
    SamplerRetries {
        context: &'static str,
        retries: usize,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
