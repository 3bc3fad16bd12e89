use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The spectral parameter leaves the resolvent undefined (|z| ≤ 1).
    #[error("ill-posed problem: {0}")]
    IllPosed(String),

    #[error("resource cap exceeded: requested {requested} symbols, cap is {cap}")]
    ResourceCap { requested: usize, cap: usize },

    #[error("evolution horizon too short: need l_max >= {required}, have {available}")]
    InsufficientHorizon { required: usize, available: usize },

    #[error("truncation radius too small: need N >= {required}, have {available}")]
    TruncationTooSmall { required: usize, available: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
