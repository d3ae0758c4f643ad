use std::collections::BTreeMap;
use std::ops::Range;

use super::grid::{CellCode, ObjectSpec};
use super::{Color, DomainError, Shape};

/// Token id in the unified text + image vocabulary.
pub type TokenId = u32;

pub const BOS: TokenId = 0;
pub const EOS_TEXT: TokenId = 1;
pub const IMG_START: TokenId = 2;
pub const PAD: TokenId = 3;
const N_CONTROL: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Text,
    Image,
    Control,
}

/// Unified vocabulary: `[control | text words | image codes]`.
///
/// Image codes are `background` followed by every `(shape, color)` pair in
/// shape-major order, so each image token maps to exactly one [`CellCode`].
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    words: Vec<String>,
    word_ids: BTreeMap<String, TokenId>,
    text: Range<TokenId>,
    image: Range<TokenId>,
    n_shapes: u8,
    n_colors: u8,
}

impl Vocab {
    pub fn new<S: AsRef<str>>(words: &[S], n_shapes: u8, n_colors: u8) -> Result<Self, DomainError> {
        if n_shapes == 0 || n_colors == 0 {
            return Err(DomainError::Asset("image alphabet needs at least one shape and one color".into()));
        }
        let mut word_ids = BTreeMap::new();
        let mut owned = Vec::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            let w = w.as_ref().to_string();
            if word_ids.insert(w.clone(), N_CONTROL + i as TokenId).is_some() {
                return Err(DomainError::Asset(format!("duplicate vocabulary word `{w}`")));
            }
            owned.push(w);
        }
        let text = N_CONTROL..N_CONTROL + owned.len() as TokenId;
        let n_image = 1 + n_shapes as TokenId * n_colors as TokenId;
        let image = text.end..text.end + n_image;
        let vocab = Self { words: owned, word_ids, text, image, n_shapes, n_colors };
        assert!(vocab.text.start >= N_CONTROL && vocab.text.end <= vocab.image.start);
        Ok(vocab)
    }

    pub fn total_size(&self) -> usize {
        self.image.end as usize
    }

    pub fn text_range(&self) -> Range<TokenId> {
        self.text.clone()
    }

    pub fn image_range(&self) -> Range<TokenId> {
        self.image.clone()
    }

    pub fn n_text(&self) -> usize {
        self.words.len()
    }

    pub fn n_shapes(&self) -> u8 {
        self.n_shapes
    }

    pub fn n_colors(&self) -> u8 {
        self.n_colors
    }

    pub fn kind(&self, id: TokenId) -> Result<TokenKind, DomainError> {
        if id < N_CONTROL {
            Ok(TokenKind::Control)
        } else if self.text.contains(&id) {
            Ok(TokenKind::Text)
        } else if self.image.contains(&id) {
            Ok(TokenKind::Image)
        } else {
            Err(DomainError::OutOfVocab { id, size: self.total_size() })
        }
    }

    pub fn word_id(&self, word: &str) -> Option<TokenId> {
        self.word_ids.get(word).copied()
    }

    pub fn word(&self, id: TokenId) -> Option<&str> {
        if self.text.contains(&id) {
            Some(&self.words[(id - self.text.start) as usize])
        } else {
            None
        }
    }

    /// Renders any token as a short human-readable string.
    pub fn render_token(&self, id: TokenId) -> String {
        match id {
            BOS => "<bos>".into(),
            EOS_TEXT => "<eos>".into(),
            IMG_START => "<img_start>".into(),
            PAD => "<pad>".into(),
            _ => match self.word(id) {
                Some(w) => w.to_string(),
                None => format!("<img:{}>", id.saturating_sub(self.image.start)),
            },
        }
    }

    pub fn image_token(&self, cell: CellCode) -> TokenId {
        self.image.start + self.cell_index(cell)
    }

    pub fn cell_code(&self, id: TokenId) -> Result<CellCode, DomainError> {
        match self.kind(id)? {
            TokenKind::Image => Ok(self.cell_from_index(id - self.image.start)),
            kind => Err(DomainError::KindError { id, kind }),
        }
    }

    pub(crate) fn cell_index(&self, cell: CellCode) -> u32 {
        match cell {
            CellCode::Background => 0,
            CellCode::Object(o) => 1 + o.shape.0 as u32 * self.n_colors as u32 + o.color.0 as u32,
        }
    }

    pub(crate) fn cell_from_index(&self, idx: u32) -> CellCode {
        if idx == 0 {
            CellCode::Background
        } else {
            let k = idx - 1;
            CellCode::Object(ObjectSpec { shape: Shape((k / self.n_colors as u32) as u8), color: Color((k % self.n_colors as u32) as u8) })
        }
    }

    pub fn is_valid_object(&self, o: ObjectSpec) -> bool {
        o.shape.0 < self.n_shapes && o.color.0 < self.n_colors
    }
}
