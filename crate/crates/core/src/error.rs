use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NilError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature mode {mode} cannot integrate over O({p})")]
    QuadratureMismatch { mode: &'static str, p: usize },

    #[error("label kind mismatch: {0}")]
    KindMismatch(String),

    #[error("test function is not K-invariant")]
    NotKInvariant,

    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, NilError>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(NilError::DimensionMismatch { expected, got })
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> NilError {
    NilError::InvalidParameter(msg.into())
}
