use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An unsupported or inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument with the wrong shape or an invalid value.
    #[error("argument error: {0}")]
    Argument(String),

    /// A matrix that was required to lie in the algebra does not.
    #[error("matrix lies outside the algebra (residual {residual:.3e})")]
    NotInAlgebra { residual: f64 },

    /// The requested construction does not exist for this algebra.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Alignment is undefined for a zero gradient.
    #[error("zero gradient: alignment is undefined")]
    ZeroGradient,

    /// An optimizer produced a non-finite gradient estimate.
    #[error("non-finite gradient at iteration {iteration}")]
    NonFiniteGradient { iteration: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
