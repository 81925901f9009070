use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid strategy space: n={n}, k_r={k_r} (need n >= 2 and 1 <= k_r <= n)")]
    InvalidSpace { n: usize, k_r: usize },

    #[error("space too large: {count} strategies exceeds enumeration cap {cap}")]
    SpaceTooLarge { count: String, cap: u64 },

    #[error("strategy space is not enumerable, use the dynamic-programming sampler")]
    NotEnumerable,

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("channel weight {index} is not positive and finite ({value})")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("internal invariant violated: chosen channel {channel} has zero marginal probability")]
    ZeroMarginal { channel: usize },

    #[error("envelope '{envelope}' does not apply to regime '{regime}'")]
    RegimeMismatch { envelope: String, regime: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
