use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum HawkesError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("unknown ward label `{0}`")]
    UnknownWard(String),

    #[error("timestamp {timestamp} lies outside the span [{start}, {end})")]
    OutsideSpan {
        timestamp: String,
        start: String,
        end: String,
    },

    #[error("bins must be strictly increasing (from {from} to {to})")]
    NonIncreasingBins { from: usize, to: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("intensity {value:e} in dimension {dim} at bin {bin} is too small to take a logarithm")]
    VanishingIntensity { dim: usize, bin: usize, value: f64 },

    #[error("simulation exceeded the count cap at bin {bin} (intensity {intensity:e})")]
    Explosive { bin: usize, intensity: f64 },

    #[error("no arrival within {horizon_bins} bins")]
    HorizonExceeded { horizon_bins: usize },

    #[error("optimizer failed: {0}")]
    Optimizer(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("row {row}: {message}")]
    Schema { row: usize, message: String },

    #[error("instance too large for the reference evaluator: {0}")]
    TooLarge(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = HawkesError> = std::result::Result<T, E>;
