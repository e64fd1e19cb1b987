use thiserror::Error;

/// Errors produced by the modelling pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} channels, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("series length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("series grids differ: {detail}")]
    GridMismatch { detail: String },

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },

    #[error("need at least {needed} samples in {what}, got {got}")]
    TooFewSamples {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("target transform requires a positive scaled value, got {value}")]
    TransformDomain { value: f64 },

    #[error("raw target must be non-negative, got {value} at index {index}")]
    NegativeTarget { value: f64, index: usize },

    #[error("target series is constant; cannot derive a scale")]
    DegenerateTarget,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("loss became non-finite on example {example_index}")]
    NonFiniteLoss { example_index: usize },

    #[error(
        "optimization diverged at epoch {epoch}, batch {batch}; parameter snapshot: {snapshot}"
    )]
    Diverged {
        epoch: usize,
        batch: usize,
        snapshot: String,
    },

    #[error("ensemble is degenerate (zero spread) at step {step}")]
    DegenerateEnsemble { step: usize },

    #[error("probability value out of [0, 1]: {value} at index {index}")]
    ProbabilityRange { value: f64, index: usize },

    #[error("observed range is zero; cannot normalize")]
    ZeroRange,

    #[error("ensemble does not carry quantile level {level}; configure it before sampling")]
    QuantileUnavailable { level: f64 },

    #[error("model file parse error at line {line}: {detail}")]
    ModelParse { line: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
