//! The single causal policy over the unified vocabulary, with exact
//! analytic gradients, sampling and checkpointing.

pub mod checkpoint;
mod model;
mod params;
mod sample;

use thiserror::Error;

use crate::domain::TokenId;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use model::{apply_mask, masked_log_softmax, mix_logits, Decoder, GuidedSequence, LogProbTrace, Phase, Target, WeightedSequence};
pub use params::{ModelConfig, PolicyParams, VocabLayout, TENSOR_NAMES};
pub use sample::{sample_token, Sampling};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("context exceeds the model limit of {limit} positions")]
    ContextTooLong { limit: usize },
    #[error("token {0} is outside the vocabulary")]
    InvalidToken(TokenId),
    #[error("token {token} at position {index} is masked in its phase")]
    MaskedToken { index: usize, token: TokenId },
    #[error("target index {0} out of range")]
    BadTarget(usize),
    #[error("schedule length {phases} does not match {tokens} tokens")]
    BadSchedule { tokens: usize, phases: usize },
    #[error("every logit is masked")]
    AllMasked,
    #[error("temperature must be positive and finite, got {0}")]
    BadTemperature(f64),
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite gradient (training diverged)")]
    NonFiniteGradient,
    #[error("checkpoint is not in the policy format")]
    BadMagic,
    #[error("checkpoint format version {found}, this reader understands {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint checksum mismatch or truncated file")]
    CorruptChecksum,
    #[error("checkpoint layout: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
