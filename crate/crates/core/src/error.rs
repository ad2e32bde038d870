use thiserror::Error;

use crate::tensor::Shape;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: Shape,
        found: Shape,
    },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("singular inversion with eta = 0: {count} frequencies below the spectral floor")]
    Singular { count: usize },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("external denoiser failed: {0}")]
    ExternalDenoiser(String),

    #[error("iteration t = {t}: {source}")]
    Iteration {
        t: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad inputs or configuration rather than a
    /// failure during computation.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::ShapeMismatch { .. }
            | Error::InvalidShape(_)
            | Error::Validation(_)
            | Error::Assumption(_)
            | Error::Format { .. } => true,
            Error::Iteration { source, .. } => source.is_validation(),
            _ => false,
        }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
