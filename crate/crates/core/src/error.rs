use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(&'static str),
    #[error("channel has zero energy, SNR is undefined")]
    ZeroChannel,
    #[error("effective noise variance must be positive, got {0}")]
    NonPositiveNoise(f64),
    #[error("LDPC code: {0}")]
    Code(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
