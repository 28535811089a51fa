use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    /// Invalid parameter or configuration value.
    #[error("config: {0}")]
    Config(String),

    /// Mismatched buffer/matrix dimensions.
    #[error("dimension: {0}")]
    Dimension(String),

    /// A metric is undefined for the given inputs (e.g. zero-energy reference).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Subband mapping could not be planned.
    #[error("plan: {0}")]
    Plan(String),

    /// Training diverged or could not proceed.
    #[error("training: {0}")]
    Training(String),

    /// Receiver-side timing recovery failed.
    #[error("timing recovery: {0}")]
    Timing(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
