use thiserror::Error;

/// Errors produced anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where a quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// The classical Bessel construction only exists for a non-negative discriminant.
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// The run diverged without the growth signature of a genuine blow-up.
    #[error("solver instability at t = {t}: {message}")]
    Instability { t: f64, message: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
