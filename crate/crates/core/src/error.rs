use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("subcarrier index {index} out of range 1..={count}")]
    SubcarrierOutOfRange { index: usize, count: usize },

    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),

    #[error("channel needs at least one path")]
    EmptyPaths,

    #[error("no integer wrap index places the focus inside [-1, 1] at {freq} Hz")]
    InfeasibleFocus { freq: f64 },

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("empty alpha_t interval [{lo}, {hi}]")]
    EmptyInterval { lo: f64, hi: f64 },

    #[error("dimension mismatch: {0}")]
    Mismatch(String),

    #[error("newton solve failed: {0}")]
    Newton(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
