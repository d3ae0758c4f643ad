use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{TokenId, Vocab};

/// Architecture of the policy: one causal self-attention layer followed by
/// a tanh feed-forward block and a linear readout over the full vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Residual width.
    pub d_model: usize,
    /// Feed-forward width.
    pub d_hidden: usize,
    /// Longest `[BOS] + instruction + prompt + plan` prefix the model accepts.
    pub max_prefix: usize,
    /// Number of image tokens per response (`h * w`).
    pub image_len: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { d_model: 24, d_hidden: 48, max_prefix: 48, image_len: 64 }
    }
}

/// Token-id ranges the model needs for phase masking.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabLayout {
    pub total: usize,
    pub text: Range<TokenId>,
    pub image: Range<TokenId>,
}

impl From<&Vocab> for VocabLayout {
    fn from(v: &Vocab) -> Self {
        Self { total: v.total_size(), text: v.text_range(), image: v.image_range() }
    }
}

pub(crate) const N_TENSORS: usize = 10;
pub const TENSOR_NAMES: [&str; N_TENSORS] = ["tok_emb", "pos_emb", "wq", "wk", "wv", "wo", "w1", "b1", "w_out", "b_out"];

pub(crate) const TOK_EMB: usize = 0;
pub(crate) const POS_EMB: usize = 1;
pub(crate) const WQ: usize = 2;
pub(crate) const WK: usize = 3;
pub(crate) const WV: usize = 4;
pub(crate) const WO: usize = 5;
pub(crate) const W1: usize = 6;
pub(crate) const B1: usize = 7;
pub(crate) const W_OUT: usize = 8;
pub(crate) const B_OUT: usize = 9;

/// Flat parameter storage with a fixed tensor table. Gradient buffers use
/// the same layout (see [`PolicyParams::zeros_like`]).
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub(crate) config: ModelConfig,
    pub(crate) layout: VocabLayout,
    pub(crate) data: Vec<f64>,
}

impl PolicyParams {
    pub fn tensor_shapes(config: &ModelConfig, vocab_size: usize) -> [(usize, usize); N_TENSORS] {
        let d = config.d_model;
        let f = config.d_hidden;
        [(vocab_size, d), (config.max_prefix + config.image_len + 1, d), (d, d), (d, d), (d, d), (d, d), (f, d), (f, 1), (vocab_size, f), (vocab_size, 1)]
    }

    pub fn n_params(config: &ModelConfig, vocab_size: usize) -> usize {
        Self::tensor_shapes(config, vocab_size).iter().map(|(r, c)| r * c).sum()
    }

    /// Weights and embeddings drawn from uniform(-0.05, 0.05); biases zero.
    pub fn init(config: ModelConfig, vocab: &Vocab, seed: u64) -> Self {
        let layout = VocabLayout::from(vocab);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shapes = Self::tensor_shapes(&config, layout.total);
        let mut data = Vec::with_capacity(Self::n_params(&config, layout.total));
        for (i, (r, c)) in shapes.iter().enumerate() {
            let bias = i == B1 || i == B_OUT;
            for _ in 0..r * c {
                data.push(if bias { 0.0 } else { rng.gen_range(-0.05..0.05) });
            }
        }
        Self { config, layout, data }
    }

    pub fn zeros_like(&self) -> Self {
        Self { config: self.config, layout: self.layout.clone(), data: vec![0.0; self.data.len()] }
    }

    pub fn from_raw(config: ModelConfig, layout: VocabLayout, data: Vec<f64>) -> Option<Self> {
        (data.len() == Self::n_params(&config, layout.total)).then_some(Self { config, layout, data })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &VocabLayout {
        &self.layout
    }

    pub fn vocab_size(&self) -> usize {
        self.layout.total
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn offsets(&self) -> [Range<usize>; N_TENSORS] {
        let shapes = Self::tensor_shapes(&self.config, self.layout.total);
        let mut start = 0;
        std::array::from_fn(|i| {
            let len = shapes[i].0 * shapes[i].1;
            let r = start..start + len;
            start += len;
            r
        })
    }

    pub(crate) fn split(&self) -> [&[f64]; N_TENSORS] {
        let offs = self.offsets();
        std::array::from_fn(|i| &self.data[offs[i].clone()])
    }

    pub(crate) fn split_mut(&mut self) -> [&mut [f64]; N_TENSORS] {
        let offs = self.offsets();
        let mut rest: &mut [f64] = &mut self.data;
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(N_TENSORS);
        let mut consumed = 0;
        for r in offs {
            let (head, tail) = std::mem::take(&mut rest).split_at_mut(r.end - consumed);
            consumed = r.end;
            out.push(head);
            rest = tail;
        }
        out.try_into().unwrap_or_else(|_| unreachable!())
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        let i = TENSOR_NAMES.iter().position(|n| *n == name)?;
        Some(self.split()[i])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn add_scaled(&mut self, other: &PolicyParams, scale: f64) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }
}
