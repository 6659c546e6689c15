use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid catalog: {0}")]
    Catalog(String),

    #[error("invalid popularity profile: {0}")]
    Profile(String),

    #[error("invalid SPO instance: {0}")]
    Instance(String),

    #[error("brute force supports at most {max} files, got {got}")]
    TooManyFiles { got: usize, max: usize },

    #[error("cache capacity {capacity} is smaller than the largest file size {largest}")]
    CapacityBelowLargestFile { capacity: u64, largest: u32 },

    #[error("invalid policy: {0}")]
    Policy(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
