use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("infeasible configuration: {0}")]
    InfeasibleConfig(String),
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("defaults file: {0}")]
    Defaults(String),
    #[error(transparent)]
    Core(#[from] blockcirc::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
