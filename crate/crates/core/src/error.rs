use alloc::string::String;

/// Errors surfaced by the core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("value out of domain: {0}")]
    Domain(String),
    #[error("tensor shape mismatch: {0}")]
    Shape(String),
    #[error("no valid action in mask")]
    EmptyMask,
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("reward normalizer is not calibrated; run the random-action pre-training episodes first")]
    Uncalibrated,
    #[error("training diverged: loss {loss} at gradient step {step}")]
    Diverged { loss: f64, step: u64 },
    #[error("safety violation at step {step} (seed {seed}): {detail}")]
    Safety { seed: u64, step: u64, detail: String },
    #[error("missing checkpoint for learned policy {0}")]
    MissingCheckpoint(String),
}

pub type Result<T> = core::result::Result<T, Error>;
