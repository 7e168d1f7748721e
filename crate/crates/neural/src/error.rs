use thiserror::Error;

pub type Result<T, E = NeuralError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value at coordinate {coordinate}: {detail}")]
    NonFinite { coordinate: usize, detail: String },

    #[error("bad magic: expected \"FPFN\", found {0:?}")]
    BadMagic(String),

    #[error("unsupported checkpoint version {found} (this build reads up to {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("truncated checkpoint: {0}")]
    Truncated(String),

    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

impl NeuralError {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        NeuralError::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        NeuralError::InvalidArgument(msg.into())
    }
}
