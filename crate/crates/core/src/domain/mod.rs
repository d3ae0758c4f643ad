//! The synthetic world: vocabulary layout, prompt grammar, scene specs,
//! knowledge table and the image-token decoder.

mod grammar;
mod grid;
mod vocab;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use grammar::{knowledge_lookup, Direction, Grammar, KnowledgeTable, Relation, SceneSpec, DEFAULT_ASSET};
pub use grid::{decode_image, CellCode, GridImage, ObjectSpec};
pub use vocab::{TokenId, TokenKind, Vocab, BOS, EOS_TEXT, IMG_START, PAD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Shape(pub u8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Color(pub u8);

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("grammar error at token {position} (`{token}`): {reason}")]
    Grammar { position: usize, token: String, reason: String },
    #[error("unknown knowledge key `{0}`")]
    UnknownKey(String),
    #[error("expected {expected} image tokens, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("token {id} is {kind:?}, not an image token")]
    KindError { id: TokenId, kind: TokenKind },
    #[error("token id {id} outside vocabulary of size {size}")]
    OutOfVocab { id: TokenId, size: usize },
    #[error("invalid scene: {0}")]
    InvalidSpec(String),
    #[error("asset: {0}")]
    Asset(String),
}

/// A grammar with its vocabulary and tokenized planning instruction.
#[derive(Debug, Clone)]
pub struct World {
    pub grammar: Grammar,
    pub vocab: Vocab,
    pub instruction: Vec<TokenId>,
}

impl World {
    pub fn new(grammar: Grammar) -> Result<Self, DomainError> {
        let vocab = grammar.build_vocab();
        let instruction = grammar.instruction_tokens(&vocab)?;
        Ok(Self { grammar, vocab, instruction })
    }

    pub fn default_world() -> Self {
        Self::new(Grammar::default_world()).expect("default asset is valid")
    }

    pub fn from_asset(text: &str) -> Result<Self, DomainError> {
        Self::new(Grammar::from_asset(text)?)
    }
}

/// Classifies a token id.
pub fn token_kind(id: TokenId, vocab: &Vocab) -> Result<TokenKind, DomainError> {
    vocab.kind(id)
}
