use thiserror::Error;

/// Errors raised by model construction and the analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid thresholds ({alpha1}, {alpha2}): need 0 <= alpha1 < alpha2 <= 1")]
    InvalidThresholds { alpha1: f64, alpha2: f64 },

    #[error("invalid memory staircase: {0}")]
    InvalidStaircase(String),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no endemic equilibrium {0}")]
    NoEndemicEquilibrium(String),

    #[error("state representations differ; discretize the staircase before comparing with a relay bank")]
    MixedRepresentations,

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
