//! Crate-wide error type.

use thiserror::Error;

/// Errors produced anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a precondition (invalid range, empty input, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Tensor or image dimensions do not line up.
    #[error("shape error: {0}")]
    Shape(String),

    /// A computation produced or received a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A serialized artifact (checkpoint, IDX file, config) is malformed.
    #[error("format error: {0}")]
    Format(String),

    /// A referenced id or named entity does not exist.
    #[error("not found: {0}")]
    NotFound(String),

    /// An operation was called on an object in the wrong lifecycle state.
    #[error("state error: {0}")]
    State(String),

    /// Unlearning would remove the last member of a cluster; the caller must
    /// re-cluster explicitly instead.
    #[error("cluster {cluster_id} would be emptied by this removal; re-cluster before retrying")]
    ClusterCollapse { cluster_id: usize },

    /// A configuration field failed validation.
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Prefix the message with the pipeline stage it came from.
    pub fn tag(self, module: &str) -> Error {
        match self {
            Error::Domain(m) => Error::Domain(format!("{module}: {m}")),
            Error::Shape(m) => Error::Shape(format!("{module}: {m}")),
            Error::Numeric(m) => Error::Numeric(format!("{module}: {m}")),
            Error::Format(m) => Error::Format(format!("{module}: {m}")),
            Error::NotFound(m) => Error::NotFound(format!("{module}: {m}")),
            Error::State(m) => Error::State(format!("{module}: {m}")),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
