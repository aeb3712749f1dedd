use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(String),

    /// The k-NN graph has more than one connected component; raise k.
    #[error("k-NN graph is disconnected into {} components (sizes {component_sizes:?}); increase k", component_sizes.len())]
    DisconnectedGraph { component_sizes: Vec<usize> },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("need at least two classes to train, found {0}")]
    SingleClass(usize),

    #[error("evaluator is untrained: {0}")]
    Untrained(String),

    #[error("manifest row {row}: {message}")]
    Manifest { row: usize, message: String },

    #[error("load error: {0}")]
    Load(String),

    #[error("feature store does not match manifest (store checksum {store}, manifest checksum {manifest})")]
    ChecksumMismatch { store: String, manifest: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
