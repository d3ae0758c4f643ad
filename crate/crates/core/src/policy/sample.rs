use rand::Rng;
use serde::{Deserialize, Serialize};

use super::PolicyError;
use crate::domain::TokenId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Argmax, the zero-temperature limit. Ties go to the lowest id.
    Greedy,
    Temperature(f64),
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling::Temperature(1.0)
    }
}

/// Draws one token from `softmax(logits / temperature)`; `-inf` entries are
/// never chosen.
pub fn sample_token<R: Rng + ?Sized>(logits: &[f64], mode: Sampling, rng: &mut R) -> Result<TokenId, PolicyError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &l) in logits.iter().enumerate() {
        if l.is_finite() && best.is_none_or(|(_, b)| l > b) {
            best = Some((i, l));
        }
    }
    let (argmax, max) = best.ok_or(PolicyError::AllMasked)?;
    let temperature = match mode {
        Sampling::Greedy => return Ok(argmax as TokenId),
        Sampling::Temperature(t) if t > 0.0 && t.is_finite() => t,
        Sampling::Temperature(t) => return Err(PolicyError::BadTemperature(t)),
    };
    let weights: Vec<f64> = logits.iter().map(|&l| if l.is_finite() { ((l - max) / temperature).exp() } else { 0.0 }).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    let mut last = argmax;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last = i;
            if u < w {
                return Ok(i as TokenId);
            }
            u -= w;
        }
    }
    Ok(last as TokenId)
}
