use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A netpbm header or payload could not be decoded. `field` names the
    /// offending header field (`magic`, `width`, `height`, `maxval`, `payload`).
    #[error("parse error in {field}: {message}")]
    Parse { field: &'static str, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
