use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown scenario tag `{0}` (expected a, b or c)")]
    UnknownScenario(String),

    #[error("decision requested outside a legal decision point (t = {time}s)")]
    IllegalDecision { time: f64 },

    #[error("phase index {index} out of range for a {phases}-phase program")]
    PhaseOutOfRange { index: usize, phases: usize },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("input {input:?} is smaller than kernel size {kernel}")]
    KernelTooLarge { input: Vec<usize>, kernel: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("replay buffer holds {size} transitions, {required} required before updates")]
    BufferNotWarm { size: usize, required: usize },

    #[error(transparent)]
    Io(#[from] io::Error),
}
