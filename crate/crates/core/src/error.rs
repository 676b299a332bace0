use std::io;

use thiserror::Error;

use crate::latent::LatentTensor;

pub type Result<T, E = RivalError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum RivalError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing cached hidden state for site `{site}` at step {step}")]
    MissingCache { site: String, step: usize },

    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(String),

    #[error("numerical divergence at step {}: {}", .0.step, .0.reason)]
    NumericalDivergence(Box<DivergenceDump>),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Tensors of the step that produced a non-finite latent.
#[derive(Debug, Clone)]
pub struct DivergenceDump {
    pub step: usize,
    pub reason: String,
    pub latent: LatentTensor,
    pub eps: LatentTensor,
}

impl RivalError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        RivalError::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        RivalError::Config(msg.into())
    }
}
