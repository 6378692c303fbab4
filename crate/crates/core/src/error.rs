use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// The grid cannot resolve the correlation envelope.
    #[error("grid too coarse: {0}")]
    Resolution(String),

    #[error("time {t} outside the simulated interval [0, {t_max}]")]
    Domain { t: f64, t_max: f64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("numerical instability: {0}")]
    NumericalInstability(String),

    #[error("domain too small: {0}")]
    DomainTooSmall(String),

    #[error("config error for key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }
}
