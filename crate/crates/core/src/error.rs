use thiserror::Error;

/// Errors raised by the placement toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),
    #[error("demanded capacity must be non-negative, got {0}")]
    NegativeCapacity(f64),
    #[error("empty sample set")]
    EmptySamples,
    #[error("cannot form {k} clusters from {distinct} distinct samples")]
    TooFewSamples { k: usize, distinct: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("singular SNR system")]
    SingularSystem,
    #[error("codebook is missing or does not match the samples")]
    MissingCodebook,
    #[error("spec file error: {0}")]
    SpecFile(#[from] toml::de::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
