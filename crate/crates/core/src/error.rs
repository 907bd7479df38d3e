use thiserror::Error;

/// Errors raised by the landscape, dynamics and experiment layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("cascading regime unsupported (a = {a} > p = {p})")]
    Cascading { a: f64, p: f64 },

    #[error("index {index} out of range for level {level}")]
    IndexOutOfRange { level: u8, index: u64 },

    #[error("k = {k} exceeds the number of configurations ({states})")]
    TooManyRecords { k: u64, states: u64 },

    #[error("insufficient sample: need at least {need}, got {got}")]
    InsufficientSample { need: usize, got: usize },

    #[error("state space too large for dense solve: {states} states (max {max})")]
    TooLarge { states: u64, max: u64 },

    #[error("no visits to rank {rank} observed within the event budget")]
    NoVisits { rank: usize },

    #[error("reference state never revisited within the event budget")]
    NoRenewal,

    #[error("incomplete mapping: {0}")]
    Mapping(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
