use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::GrpoError;
use crate::domain::TokenId;
use crate::policy::{LogProbTrace, PolicyParams, WeightedSequence};
use crate::reward::RewardReport;
use crate::rollout::{guided_sequence, image_context, text_context, GenConfig, RolloutGroup};

/// Group-normalized rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageSet {
    pub advantages: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

/// `A_i = (R_i - mean) / std` with the population std; all zeros when
/// `std <= eps`.
pub fn compute_advantages(rewards: &[f64], eps: f64) -> Result<AdvantageSet, GrpoError> {
    if rewards.len() < 2 {
        return Err(GrpoError::GroupTooSmall(rewards.len()));
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let std = (rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    let advantages = if std <= eps { vec![0.0; rewards.len()] } else { rewards.iter().map(|r| (r - mean) / std).collect() };
    Ok(AdvantageSet { advantages, mean, std })
}

fn check_aligned(a: &LogProbTrace, b: &LogProbTrace, j: usize) -> Result<(), GrpoError> {
    if a.len() != b.len() || j >= a.len() {
        return Err(GrpoError::MisalignedTraces { left: a.len(), right: b.len(), position: j });
    }
    Ok(())
}

/// `exp(logp_new - logp_old)` at position `j`. Positions below
/// `semantic_len` belong to the plan, the rest to the image.
pub fn importance_ratio(new: &LogProbTrace, old: &LogProbTrace, j: usize, semantic_len: usize) -> Result<f64, GrpoError> {
    check_aligned(new, old, j)?;
    if semantic_len > new.len() {
        return Err(GrpoError::MisalignedTraces { left: new.len(), right: semantic_len, position: j });
    }
    Ok((new.logp[j] - old.logp[j]).exp())
}

/// `e^d - d - 1` for `d = logp_ref - logp_new`.
pub fn k3(delta: f64) -> f64 {
    delta.exp_m1() - delta
}

pub fn kl_estimate(new: &LogProbTrace, reference: &LogProbTrace, j: usize) -> Result<f64, GrpoError> {
    check_aligned(new, reference, j)?;
    Ok(k3(reference.logp[j] - new.logp[j]))
}

/// Which response segments receive objective terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    None,
    SemanticOnly,
    TokenOnly,
    Both,
}

impl AblationMode {
    pub const ALL: [AblationMode; 4] = [AblationMode::None, AblationMode::SemanticOnly, AblationMode::TokenOnly, AblationMode::Both];

    pub fn trains_text(self) -> bool {
        matches!(self, AblationMode::SemanticOnly | AblationMode::Both)
    }

    pub fn trains_image(self) -> bool {
        matches!(self, AblationMode::TokenOnly | AblationMode::Both)
    }

    pub fn trains(self) -> bool {
        self != AblationMode::None
    }

    /// Modes without plan optimization generate images straight from the prompt.
    pub fn uses_cot(self) -> bool {
        self.trains_text()
    }

    pub fn name(self) -> &'static str {
        match self {
            AblationMode::None => "none",
            AblationMode::SemanticOnly => "semantic_only",
            AblationMode::TokenOnly => "token_only",
            AblationMode::Both => "both",
        }
    }
}

impl FromStr for AblationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| format!("unknown mode `{s}` (expected none, semantic_only, token_only or both)"))
    }
}

impl std::fmt::Display for AblationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    pub clip_eps: f64,
    pub beta: f64,
    pub mode: AblationMode,
}

/// A rollout group with its rewards and advantages.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredGroup {
    pub group: RolloutGroup,
    pub rewards: Vec<RewardReport>,
    pub advantages: AdvantageSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveOutput {
    pub objective: f64,
    pub grad: Option<PolicyParams>,
    /// Mean k3 estimate over trained positions.
    pub mean_kl: f64,
    /// Share of trained positions where the clipped branch is selected.
    pub clip_fraction: f64,
    pub trained_tokens: usize,
}

/// Value and gradient weight of one position, both already divided by the
/// group token count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionTerm {
    pub value: f64,
    pub weight: f64,
    pub kl: f64,
    pub clipped: bool,
}

/// `min(r A, clip(r) A) - beta * k3` and its derivative with respect to
/// `logp_new`, scaled by `1 / n_tokens`.
pub fn position_term(logp_new: f64, logp_old: f64, logp_ref: f64, advantage: f64, cfg: &ObjectiveConfig, n_tokens: f64) -> PositionTerm {
    let r = (logp_new - logp_old).exp();
    let unclipped = r * advantage;
    let clipped = r.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * advantage;
    let delta = logp_ref - logp_new;
    let kl = k3(delta);
    let takes_clip = clipped < unclipped;
    let surrogate = if takes_clip { clipped } else { unclipped };
    let d_surrogate = if takes_clip { 0.0 } else { unclipped };
    PositionTerm { value: (surrogate - cfg.beta * kl) / n_tokens, weight: (d_surrogate + cfg.beta * delta.exp_m1()) / n_tokens, kl, clipped: takes_clip }
}

struct ResponseOutput {
    objective: f64,
    kl_sum: f64,
    clipped: usize,
    trained: usize,
    grad: Option<PolicyParams>,
}

#[allow(clippy::too_many_arguments)]
fn response_terms(
    params: &PolicyParams,
    instruction: &[TokenId],
    prompt: &[TokenId],
    response: &crate::rollout::Response,
    advantage: f64,
    n_tokens: f64,
    gen: &GenConfig,
    cfg: &ObjectiveConfig,
    want_grad: bool,
) -> Result<ResponseOutput, GrpoError> {
    let s = &response.semantic.tokens;
    let t = &response.image.tokens;
    let split = s.len();
    let mut out = ResponseOutput { objective: 0.0, kl_sum: 0.0, clipped: 0, trained: 0, grad: want_grad.then(|| params.zeros_like()) };
    let apply = |new: &[f64], offset: usize, out: &mut ResponseOutput| -> Vec<f64> {
        new.iter()
            .enumerate()
            .map(|(j, &lp)| {
                let k = offset + j;
                let term = position_term(lp, response.old.logp[k], response.reference.logp[k], advantage, cfg, n_tokens);
                out.objective += term.value;
                out.kl_sum += term.kl;
                out.clipped += term.clipped as usize;
                out.trained += 1;
                term.weight
            })
            .collect()
    };

    if cfg.mode.trains_text() && !s.is_empty() {
        let (tokens, targets) = text_context(instruction, prompt, s);
        let new = params.score_targets(&tokens, &targets, false)?.logp;
        let weights = apply(&new, 0, &mut out);
        if let Some(g) = out.grad.as_mut() {
            params.accumulate_grad(&WeightedSequence { tokens, targets, weights }, g)?;
        }
    }
    if cfg.mode.trains_image() && !t.is_empty() {
        if gen.guided_traces() {
            let mut seq = guided_sequence(prompt, s, t, gen.cfg_scale, vec![]);
            let new = params.score_guided(&seq)?;
            seq.weights = apply(&new, split, &mut out);
            if let Some(g) = out.grad.as_mut() {
                params.accumulate_guided_grad(&seq, g)?;
            }
        } else {
            let (tokens, targets) = image_context(prompt, s, t);
            let new = params.score_targets(&tokens, &targets, false)?.logp;
            let weights = apply(&new, split, &mut out);
            if let Some(g) = out.grad.as_mut() {
                params.accumulate_grad(&WeightedSequence { tokens, targets, weights }, g)?;
            }
        }
    }
    Ok(out)
}

/// Clipped group-relative objective with a k3 penalty toward the reference
/// policy. Each group is normalized by its total response token count and
/// the batch objective is the mean over groups.
pub fn grpo_objective(
    groups: &[ScoredGroup],
    params: &PolicyParams,
    instruction: &[TokenId],
    gen: &GenConfig,
    cfg: &ObjectiveConfig,
    want_grad: bool,
) -> Result<ObjectiveOutput, GrpoError> {
    if groups.is_empty() {
        return Err(GrpoError::EmptyBatch);
    }
    let mut jobs = Vec::new();
    for (gi, sg) in groups.iter().enumerate() {
        if sg.advantages.advantages.len() != sg.group.responses.len() {
            return Err(GrpoError::MisalignedTraces { left: sg.group.responses.len(), right: sg.advantages.advantages.len(), position: 0 });
        }
        for (r, resp) in sg.group.responses.iter().enumerate() {
            if resp.old.len() != resp.len() || resp.reference.len() != resp.len() {
                return Err(GrpoError::MisalignedTraces { left: resp.old.len(), right: resp.reference.len(), position: resp.len() });
            }
            jobs.push((gi, r));
        }
    }
    let scale = 1.0 / groups.len() as f64;
    let results = crate::par_map(jobs.len(), |k| {
        let (gi, r) = jobs[k];
        let sg = &groups[gi];
        let n_tokens: usize = sg.group.responses.iter().map(|x| x.len()).sum();
        let resp = &sg.group.responses[r];
        response_terms(params, instruction, &sg.group.prompt.tokens, resp, sg.advantages.advantages[r], n_tokens as f64, gen, cfg, want_grad)
    });

    let mut objective = 0.0;
    let mut kl_sum = 0.0;
    let mut clipped = 0;
    let mut trained = 0;
    let mut grad = want_grad.then(|| params.zeros_like());
    for res in results {
        let res = res?;
        objective += scale * res.objective;
        kl_sum += res.kl_sum;
        clipped += res.clipped;
        trained += res.trained;
        if let (Some(total), Some(g)) = (grad.as_mut(), res.grad.as_ref()) {
            total.add_scaled(g, scale);
        }
    }
    if !objective.is_finite() || grad.as_ref().is_some_and(|g| !g.is_finite()) {
        return Err(GrpoError::NonFiniteObjective);
    }
    let denom = trained.max(1) as f64;
    Ok(ObjectiveOutput { objective, grad, mean_kl: kl_sum / denom, clip_fraction: clipped as f64 / denom, trained_tokens: trained })
}
