use alloc::string::String;

/// Errors produced by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain an operation accepts.
    #[error("input domain error: {0}")]
    InputDomain(String),

    /// The lower-intensity estimate is not strictly below the upper one, so no
    /// midpoint threshold separates background from particles.
    #[error("degenerate intensity estimates: a_hat = {a_hat} is not below b_hat = {b_hat}")]
    DegenerateEstimates { a_hat: f64, b_hat: f64 },

    /// The image became smaller than a requested window.
    #[error("image too small: {width}x{height} cannot hold a {side}x{side} window")]
    ImageTooSmall {
        width: usize,
        height: usize,
        side: usize,
    },

    /// Two grids that must share dimensions do not.
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    /// A synthetic scene violates one of the model premises.
    #[error("invalid scene: {0}")]
    InvalidScene(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::InputDomain(msg.into())
}
