use thiserror::Error;

pub type Result<T, E = ArborError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ArborError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported operation: {0}")]
    UnsupportedOperation(String),

    /// A trait (e.g. DBH) is not defined for the given tree.
    #[error("undefined trait: {0}")]
    UndefinedTrait(String),

    #[error("non-finite loss at iteration {iteration}: rec={rec}, prior2d={prior2d}, prior3d={prior3d}")]
    NonFiniteLoss {
        iteration: usize,
        rec: f64,
        prior2d: f64,
        prior3d: f64,
    },

    #[error("malformed {format} data: {reason}")]
    Format { format: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl ArborError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        ArborError::InvalidArgument(msg.into())
    }

    pub(crate) fn format(format: &'static str, reason: impl Into<String>) -> Self {
        ArborError::Format {
            format,
            reason: reason.into(),
        }
    }
}
