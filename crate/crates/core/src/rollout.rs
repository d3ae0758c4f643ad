//! Two-step generation: a textual plan sampled in the text phase, then
//! `h * w` image tokens behind `IMG_START`, conditioned on prompt and plan.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{decode_image, DomainError, GridImage, SceneSpec, TokenId, World, EOS_TEXT, IMG_START, PAD};
use crate::policy::{
    apply_mask, masked_log_softmax, mix_logits, sample_token, Decoder, GuidedSequence, LogProbTrace, Phase, PolicyError, PolicyParams, Sampling, Target,
};
use crate::reward::{extract_queries, score, RewardConfig, RewardError, RewardQueries, RewardReport};

#[derive(Debug, Error)]
pub enum RolloutError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error("group size must be at least 1, got {0}")]
    GroupTooSmall(usize),
    #[error("invalid generation config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    /// Sampling temperature for plan tokens; 0 means greedy.
    pub text_temperature: f64,
    /// Sampling temperature for image tokens; 0 means greedy.
    pub image_temperature: f64,
    pub max_cot_len: usize,
    pub cfg_scale: f64,
    /// Generate a plan before the image. Off means the image follows the prompt directly.
    pub use_cot: bool,
    /// Use guided instead of raw conditional probabilities for image tokens in traces.
    pub cfg_in_ratio: bool,
    pub height: usize,
    pub width: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self { text_temperature: 1.0, image_temperature: 1.0, max_cot_len: 24, cfg_scale: 5.0, use_cot: true, cfg_in_ratio: false, height: 8, width: 8 }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), RolloutError> {
        let bad = |m: &str| Err(RolloutError::Config(m.to_string()));
        if !(self.text_temperature >= 0.0 && self.text_temperature.is_finite()) || !(self.image_temperature >= 0.0 && self.image_temperature.is_finite()) {
            return bad("temperatures must be finite and non-negative");
        }
        if self.max_cot_len == 0 {
            return bad("max_cot_len must be at least 1");
        }
        if !(self.cfg_scale >= 1.0 && self.cfg_scale.is_finite()) {
            return bad("cfg_scale must be finite and at least 1");
        }
        if self.height == 0 || self.width == 0 {
            return bad("grid dimensions must be positive");
        }
        Ok(())
    }

    pub fn image_len(&self) -> usize {
        self.height * self.width
    }

    /// Whether image-token traces use guided probabilities.
    pub fn guided_traces(&self) -> bool {
        self.cfg_in_ratio && self.cfg_scale != 1.0
    }
}

pub fn sampling_for(temperature: f64) -> Sampling {
    if temperature == 0.0 {
        Sampling::Greedy
    } else {
        Sampling::Temperature(temperature)
    }
}

/// A parsed, tokenized prompt with its reward queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub text: String,
    pub spec: SceneSpec,
    pub tokens: Vec<TokenId>,
    pub queries: RewardQueries,
}

impl Prompt {
    pub fn parse(world: &World, text: &str) -> Result<Self, RolloutError> {
        let spec = world.grammar.parse(text)?;
        Self::from_spec(world, &spec)
    }

    pub fn from_spec(world: &World, spec: &SceneSpec) -> Result<Self, RolloutError> {
        let text = world.grammar.render(spec);
        let tokens = world.grammar.tokenize(&text, &world.vocab)?;
        let queries = extract_queries(spec, world.grammar.knowledge())?;
        Ok(Self { text, spec: spec.clone(), tokens, queries })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticCoT {
    pub tokens: Vec<TokenId>,
    /// Stopped at `max_cot_len` rather than by `EOS_TEXT`.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenCoT {
    pub tokens: Vec<TokenId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub semantic: SemanticCoT,
    pub image: TokenCoT,
    /// Trace under the sampling policy, recorded during generation.
    pub old: LogProbTrace,
    pub reference: LogProbTrace,
    pub decoded: GridImage,
}

impl Response {
    pub fn len(&self) -> usize {
        self.semantic.tokens.len() + self.image.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutGroup {
    pub prompt: Prompt,
    pub responses: Vec<Response>,
}

/// Context for plan tokens: instruction, prompt, plan so far.
pub fn text_context(instruction: &[TokenId], prompt: &[TokenId], cot: &[TokenId]) -> (Vec<TokenId>, Vec<Target>) {
    let mut tokens = Vec::with_capacity(instruction.len() + prompt.len() + cot.len());
    tokens.extend_from_slice(instruction);
    tokens.extend_from_slice(prompt);
    let start = tokens.len();
    tokens.extend_from_slice(cot);
    let targets = (0..cot.len()).map(|j| Target { index: start + j, phase: Phase::Text }).collect();
    (tokens, targets)
}

/// Context for image tokens: prompt, full plan, `IMG_START`, image so far.
pub fn image_context(prompt: &[TokenId], cot: &[TokenId], image: &[TokenId]) -> (Vec<TokenId>, Vec<Target>) {
    let mut tokens = Vec::with_capacity(prompt.len() + cot.len() + 1 + image.len());
    tokens.extend_from_slice(prompt);
    tokens.extend_from_slice(cot);
    tokens.push(IMG_START);
    let start = tokens.len();
    tokens.extend_from_slice(image);
    let targets = (0..image.len()).map(|j| Target { index: start + j, phase: Phase::Image }).collect();
    (tokens, targets)
}

/// The unconditional context `[PAD, IMG_START]`.
pub fn unconditional_prefix() -> [TokenId; 2] {
    [PAD, IMG_START]
}

/// Conditional and unconditional image sequences for guided scoring.
pub fn guided_sequence(prompt: &[TokenId], cot: &[TokenId], image: &[TokenId], scale: f64, weights: Vec<f64>) -> GuidedSequence {
    let (cond, cond_targets) = image_context(prompt, cot, image);
    let mut uncond = unconditional_prefix().to_vec();
    uncond.extend_from_slice(image);
    GuidedSequence {
        cond,
        uncond,
        cond_targets: cond_targets.iter().map(|t| t.index).collect(),
        uncond_targets: (0..image.len()).map(|j| 2 + j).collect(),
        weights,
        scale,
    }
}

fn sample_semantic<R: Rng + ?Sized>(
    params: &PolicyParams,
    instruction: &[TokenId],
    prompt: &[TokenId],
    max_cot_len: usize,
    temperature: f64,
    rng: &mut R,
) -> Result<(SemanticCoT, Vec<f64>), PolicyError> {
    let layout = params.layout();
    let mut context = instruction.to_vec();
    context.extend_from_slice(prompt);
    let mut dec = Decoder::with_context(params, &context)?;
    let mut tokens = Vec::new();
    let mut logp = Vec::new();
    let mode = sampling_for(temperature);
    while tokens.len() < max_cot_len {
        let mut logits = dec.logits().to_vec();
        apply_mask(&mut logits, layout, Phase::Text);
        let y = sample_token(&logits, mode, rng)?;
        if y == EOS_TEXT {
            return Ok((SemanticCoT { tokens, truncated: false }, logp));
        }
        logp.push(masked_log_softmax(dec.logits(), layout, Phase::Text)[y as usize]);
        tokens.push(y);
        dec.push(y)?;
    }
    Ok((SemanticCoT { tokens, truncated: true }, logp))
}

/// Samples a plan after `instruction + prompt` until `EOS_TEXT` or `max_cot_len` tokens.
pub fn generate_semantic_cot<R: Rng + ?Sized>(
    params: &PolicyParams,
    prompt: &[TokenId],
    instruction: &[TokenId],
    max_cot_len: usize,
    temperature: f64,
    rng: &mut R,
) -> Result<SemanticCoT, PolicyError> {
    sample_semantic(params, instruction, prompt, max_cot_len, temperature, rng).map(|(c, _)| c)
}

fn sample_image<R: Rng + ?Sized>(
    params: &PolicyParams,
    prompt: &[TokenId],
    cot: &[TokenId],
    cfg: &GenConfig,
    rng: &mut R,
) -> Result<(TokenCoT, Vec<f64>), PolicyError> {
    let layout = params.layout();
    let m = cfg.image_len();
    let (context, _) = image_context(prompt, cot, &[]);
    let mut cond = Decoder::with_context(params, &context)?;
    let mut uncond = if cfg.cfg_scale != 1.0 { Some(Decoder::with_context(params, &unconditional_prefix())?) } else { None };
    let mode = sampling_for(cfg.image_temperature);
    let mut tokens = Vec::with_capacity(m);
    let mut logp = Vec::with_capacity(m);
    for _ in 0..m {
        let mut mixed = match &uncond {
            Some(u) => mix_logits(cond.logits(), u.logits(), cfg.cfg_scale),
            None => cond.logits().to_vec(),
        };
        apply_mask(&mut mixed, layout, Phase::Image);
        let y = sample_token(&mixed, mode, rng)?;
        let lp = if cfg.guided_traces() {
            masked_log_softmax(&mixed, layout, Phase::Image)[y as usize]
        } else {
            masked_log_softmax(cond.logits(), layout, Phase::Image)[y as usize]
        };
        logp.push(lp);
        tokens.push(y);
        cond.push(y)?;
        if let Some(u) = uncond.as_mut() {
            u.push(y)?;
        }
    }
    Ok((TokenCoT { tokens }, logp))
}

/// Samples `h * w` image tokens after `prompt + cot + IMG_START`, mixing in
/// the unconditional context when `cfg.cfg_scale > 1`.
pub fn generate_image_tokens<R: Rng + ?Sized>(
    params: &PolicyParams,
    prompt: &[TokenId],
    cot: &SemanticCoT,
    cfg: &GenConfig,
    rng: &mut R,
) -> Result<TokenCoT, PolicyError> {
    sample_image(params, prompt, &cot.tokens, cfg, rng).map(|(t, _)| t)
}

/// Log-probabilities of every response token under `params`: the plan in the
/// text phase after `instruction + prompt`, the image in the image phase
/// after `prompt + plan + IMG_START`.
pub fn trace_under(
    params: &PolicyParams,
    instruction: &[TokenId],
    prompt: &[TokenId],
    semantic: &[TokenId],
    image: &[TokenId],
    cfg: &GenConfig,
) -> Result<LogProbTrace, PolicyError> {
    let (tokens, targets) = text_context(instruction, prompt, semantic);
    let mut logp = params.score_targets(&tokens, &targets, false)?.logp;
    if cfg.guided_traces() {
        let seq = guided_sequence(prompt, semantic, image, cfg.cfg_scale, vec![0.0; image.len()]);
        logp.extend(params.score_guided(&seq)?);
    } else {
        let (tokens, targets) = image_context(prompt, semantic, image);
        logp.extend(params.score_targets(&tokens, &targets, false)?.logp);
    }
    Ok(LogProbTrace { logp, dists: None })
}

/// Samples one response from its own rng.
pub fn sample_response(
    params_old: &PolicyParams,
    params_ref: &PolicyParams,
    world: &World,
    prompt: &Prompt,
    cfg: &GenConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Response, RolloutError> {
    let (semantic, mut logp) = if cfg.use_cot {
        sample_semantic(params_old, &world.instruction, &prompt.tokens, cfg.max_cot_len, cfg.text_temperature, rng)?
    } else {
        (SemanticCoT { tokens: vec![], truncated: false }, vec![])
    };
    let (image, image_logp) = sample_image(params_old, &prompt.tokens, &semantic.tokens, cfg, rng)?;
    logp.extend(image_logp);
    let reference = trace_under(params_ref, &world.instruction, &prompt.tokens, &semantic.tokens, &image.tokens, cfg)?;
    let decoded = decode_image(&image.tokens, &world.vocab, cfg.height, cfg.width)?;
    Ok(Response { semantic, image, old: LogProbTrace { logp, dists: None }, reference, decoded })
}

/// Samples a plan and image without recording reference traces.
pub fn sample_grid<R: Rng + ?Sized>(
    params: &PolicyParams,
    world: &World,
    prompt: &Prompt,
    cfg: &GenConfig,
    rng: &mut R,
) -> Result<(SemanticCoT, TokenCoT, GridImage), RolloutError> {
    let semantic = if cfg.use_cot {
        sample_semantic(params, &world.instruction, &prompt.tokens, cfg.max_cot_len, cfg.text_temperature, rng)?.0
    } else {
        SemanticCoT { tokens: vec![], truncated: false }
    };
    let (image, _) = sample_image(params, &prompt.tokens, &semantic.tokens, cfg, rng)?;
    let grid = decode_image(&image.tokens, &world.vocab, cfg.height, cfg.width)?;
    Ok((semantic, image, grid))
}

/// Rng for group member `index`: a shared seed with one stream per member.
pub fn member_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Samples `g` responses under `params_old`, each from its own rng stream
/// derived from one draw of `rng`.
pub fn rollout_group<R: Rng + ?Sized>(
    params_old: &PolicyParams,
    params_ref: &PolicyParams,
    world: &World,
    prompt: &Prompt,
    g: usize,
    cfg: &GenConfig,
    rng: &mut R,
) -> Result<RolloutGroup, RolloutError> {
    if g == 0 {
        return Err(RolloutError::GroupTooSmall(g));
    }
    cfg.validate()?;
    if cfg.image_len() > params_old.config().image_len {
        return Err(RolloutError::Config(format!("grid of {} cells exceeds the model's {} image positions", cfg.image_len(), params_old.config().image_len)));
    }
    let seed: u64 = rng.gen();
    let responses = crate::par_map(g, |i| sample_response(params_old, params_ref, world, prompt, cfg, &mut member_rng(seed, i)));
    Ok(RolloutGroup { prompt: prompt.clone(), responses: responses.into_iter().collect::<Result<_, _>>()? })
}

/// One line of a rollout dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutRecord {
    pub prompt: String,
    pub cot_ids: Vec<TokenId>,
    pub cot_text: String,
    pub truncated: bool,
    pub image_tokens: Vec<TokenId>,
    pub grid: String,
    pub rewards: RewardReport,
}

impl RolloutRecord {
    pub fn new(world: &World, prompt: &Prompt, response: &Response, rewards: &RewardConfig) -> Result<Self, RolloutError> {
        let cot_text = response.semantic.tokens.iter().map(|&t| world.vocab.render_token(t)).collect::<Vec<_>>().join(" ");
        Ok(Self {
            prompt: prompt.text.clone(),
            cot_ids: response.semantic.tokens.clone(),
            cot_text,
            truncated: response.semantic.truncated,
            image_tokens: response.image.tokens.clone(),
            grid: response.decoded.to_text(&world.vocab),
            rewards: score(&response.decoded, &prompt.queries, rewards)?,
        })
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }

    pub fn from_json_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}
