use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Tensor or vector data rejected at construction.
    #[error("construction error: {0}")]
    Construction(String),

    #[error("index ({index:?}) out of range for shape {shape:?}")]
    Index {
        index: (usize, usize, usize),
        shape: (usize, usize, usize),
    },

    /// Inconsistent shapes or hyperparameters passed to a layer.
    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported {what} version {found} (expected {expected})")]
    Version {
        what: &'static str,
        found: u64,
        expected: u64,
    },

    #[error("shape mismatch in layer `{layer}`: {detail}")]
    ShapeMismatch { layer: String, detail: String },

    #[error("unknown layer `{0}`")]
    UnknownLayer(String),

    #[error("image decode error: {0}")]
    Decode(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn shape(layer: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            layer: layer.into(),
            detail: detail.into(),
        }
    }
}
