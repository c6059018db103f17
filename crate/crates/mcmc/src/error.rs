use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McmcError {
    #[error("log density is not finite at the initial point of chain {chain} (value {value})")]
    NonFiniteDensity { chain: usize, value: f64 },

    #[error("divergent trajectory: |dH| = {delta_h:.3e} exceeds threshold")]
    DivergentTrajectory { delta_h: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("too few draws for diagnostics: {have} per split half, need at least {need}")]
    TooFewDraws { have: usize, need: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}
