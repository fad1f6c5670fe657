//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong while constructing systems, integrating, or
/// post-processing trajectories.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or input violated a documented precondition.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A value escaped its admissible range (segment evaluation, field
    /// reconstruction, ...).
    #[error("out of range: {0}")]
    OutOfRange(String),

    /// A non-finite number showed up where the contract requires finite data.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// The state norm crossed the blow-up threshold during integration.
    #[error("solution norm {norm:.3e} exceeded the blow-up threshold at t = {t}")]
    Blowup { t: f64, norm: f64 },

    /// Configuration file problems (CLI).
    #[error("config error: {0}")]
    Config(String),

    /// Output file problems (CLI).
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Shorthand used all over the validation paths.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
