use thiserror::Error;

/// Errors produced by parameter validation across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension must be 1 or 2, got {0}")]
    BadDimension(usize),
    #[error("operation requires dim={required}, got dim={got}")]
    DimensionMismatch { required: usize, got: usize },
    #[error("grids do not match: {0}")]
    GridMismatch(String),
    #[error("grid under-resolves the field correlation length: spacing {spacing} > {limit} (= eps / (4 max lambda))")]
    UnderResolvedGrid { spacing: f64, limit: f64 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
