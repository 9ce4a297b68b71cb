use std::path::PathBuf;

/// Errors raised anywhere in the destruction pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value is out of range or inconsistent with the backend.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke an operation's precondition (shape mismatch, bad timestep, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Stored data is incomplete or inconsistent (missing trajectory entry, missing KV record).
    #[error("integrity error: {0}")]
    Integrity(String),

    /// Clustering was asked for more clusters than there are distinct values.
    #[error("degenerate clustering: {distinct} distinct value(s) for k = {k}")]
    DegenerateClustering { k: usize, distinct: usize },

    /// The backend failed while processing a denoising or inversion step.
    #[error("backend failure at step {step}: {source}")]
    Backend {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn integrity(msg: impl Into<String>) -> Self {
        Error::Integrity(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach the step index to a backend error.
    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            e @ Error::Backend { .. } => e,
            e => Error::Backend {
                step,
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
