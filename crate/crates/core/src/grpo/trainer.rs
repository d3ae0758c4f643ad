use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::objective::{compute_advantages, grpo_objective, k3, AblationMode, ObjectiveConfig, ScoredGroup};
use super::optim::{clip_grad_norm, Optimizer, OptimizerKind};
use super::GrpoError;
use crate::domain::World;
use crate::policy::{load_checkpoint, save_checkpoint, ModelConfig, PolicyParams};
use crate::reward::{score, RewardConfig};
use crate::rollout::{rollout_group, GenConfig, Prompt};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerConfig {
    pub lr: f64,
    /// KL penalty coefficient.
    pub beta: f64,
    pub clip_eps: f64,
    pub group_size: usize,
    pub batch_prompts: usize,
    pub max_grad_norm: f64,
    pub inner_epochs: usize,
    /// Groups whose reward std is at or below this get zero advantages.
    pub adv_eps: f64,
    pub steps: u64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub mode: AblationMode,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Preset::paper().trainer
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), GrpoError> {
        let bad = |m: &str| Err(GrpoError::Config(m.to_string()));
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.lr) || !positive(self.max_grad_norm) || !positive(self.adv_eps) {
            return bad("lr, max_grad_norm and adv_eps must be positive");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta must be non-negative");
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return bad("clip_eps must lie in (0, 1)");
        }
        if self.group_size < 2 {
            return bad("group_size must be at least 2");
        }
        if self.batch_prompts == 0 || self.inner_epochs == 0 {
            return bad("batch_prompts and inner_epochs must be at least 1");
        }
        Ok(())
    }

    pub fn objective(&self) -> ObjectiveConfig {
        ObjectiveConfig { clip_eps: self.clip_eps, beta: self.beta, mode: self.mode }
    }
}

/// A complete set of run hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preset {
    pub model: ModelConfig,
    pub trainer: TrainerConfig,
    pub generation: GenConfig,
    pub reward: RewardConfig,
}

impl Preset {
    /// Published large-model settings, kept for reference.
    pub fn paper() -> Self {
        Self {
            model: ModelConfig::default(),
            trainer: TrainerConfig {
                lr: 1e-6,
                beta: 0.01,
                clip_eps: 0.2,
                group_size: 8,
                batch_prompts: 8,
                max_grad_norm: 1.0,
                inner_epochs: 1,
                adv_eps: 1e-8,
                steps: 1600,
                seed: 0,
                optimizer: OptimizerKind::Adam,
                mode: AblationMode::Both,
            },
            generation: GenConfig { cfg_scale: 5.0, ..GenConfig::default() },
            reward: RewardConfig::default(),
        }
    }

    /// Sized for runs of a minute or two on one CPU core.
    pub fn desk() -> Self {
        Self {
            model: ModelConfig { d_model: 16, d_hidden: 32, max_prefix: 32, image_len: 64 },
            trainer: TrainerConfig { lr: 3e-3, batch_prompts: 2, steps: 200, ..Self::paper().trainer },
            generation: GenConfig { max_cot_len: 6, cfg_scale: 1.0, ..GenConfig::default() },
            reward: RewardConfig::default(),
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "paper" => Some(Self::paper()),
            "desk" => Some(Self::desk()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: u64,
    pub mean_reward: f64,
    pub hpm: f64,
    pub det: f64,
    pub vqa: f64,
    pub orm: f64,
    pub objective: f64,
    pub mean_kl: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
    pub applied_grad_norm: f64,
    pub cot_len_mean: f64,
    pub cot_len_max: usize,
    pub truncated_fraction: f64,
}

/// Prompts grouped into strata; batches draw a stratum, then a prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptPool {
    pub strata: Vec<Vec<Prompt>>,
}

impl PromptPool {
    pub fn new(strata: Vec<Vec<Prompt>>) -> Result<Self, GrpoError> {
        let strata: Vec<_> = strata.into_iter().filter(|s| !s.is_empty()).collect();
        if strata.is_empty() {
            return Err(GrpoError::Config("prompt pool is empty".into()));
        }
        Ok(Self { strata })
    }

    pub fn len(&self) -> usize {
        self.strata.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn batch<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Prompt> {
        (0..n)
            .map(|_| {
                let s = &self.strata[rng.gen_range(0..self.strata.len())];
                s[rng.gen_range(0..s.len())].clone()
            })
            .collect()
    }

    /// The batch for a given step of a seeded run.
    pub fn batch_for_step(&self, n: usize, seed: u64, step: u64) -> Vec<Prompt> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        rng.set_stream(step);
        self.batch(n, &mut rng)
    }
}

/// Policy, frozen reference and optimizer state of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainerState {
    pub config: TrainerConfig,
    pub generation: GenConfig,
    pub reward: RewardConfig,
    pub params: PolicyParams,
    pub reference: PolicyParams,
    pub optimizer: Optimizer,
    pub step: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct StateFile {
    step: u64,
    optimizer_t: u64,
}

const STATE_FILES: [&str; 4] = ["policy.bcot", "reference.bcot", "adam_m.bcot", "adam_v.bcot"];

impl TrainerState {
    pub fn new(params: PolicyParams, config: TrainerConfig, generation: GenConfig, reward: RewardConfig) -> Result<Self, GrpoError> {
        config.validate()?;
        generation.validate()?;
        let optimizer = Optimizer::new(config.optimizer, &params);
        Ok(Self { config, generation, reward, reference: params.clone(), params, optimizer, step: 0 })
    }

    pub fn save(&self, dir: &Path) -> Result<(), GrpoError> {
        std::fs::create_dir_all(dir)?;
        let tensors = [&self.params, &self.reference, &self.optimizer.m, &self.optimizer.v];
        for (name, p) in STATE_FILES.iter().zip(tensors) {
            save_checkpoint(p, &dir.join(name))?;
        }
        let meta = serde_json::to_string(&StateFile { step: self.step, optimizer_t: self.optimizer.t }).expect("state serializes");
        let tmp = dir.join("trainer.json.tmp");
        std::fs::write(&tmp, meta)?;
        std::fs::rename(tmp, dir.join("trainer.json"))?;
        Ok(())
    }

    pub fn load(dir: &Path, config: TrainerConfig, generation: GenConfig, reward: RewardConfig) -> Result<Self, GrpoError> {
        let meta: StateFile = serde_json::from_str(&std::fs::read_to_string(dir.join("trainer.json"))?).map_err(|e| GrpoError::Config(e.to_string()))?;
        let [params, reference, m, v] = STATE_FILES.map(|n| load_checkpoint(&dir.join(n)));
        let mut state = Self::new(params?, config, generation, reward)?;
        state.reference = reference?;
        state.optimizer.m = m?;
        state.optimizer.v = v?;
        state.optimizer.t = meta.optimizer_t;
        state.step = meta.step;
        Ok(state)
    }
}

/// A copy of the current policy to sample from, and the frozen reference.
pub fn snapshot_policies(state: &TrainerState) -> (PolicyParams, &PolicyParams) {
    (state.params.clone(), &state.reference)
}

fn step_rng(seed: u64, step: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step);
    rng
}

/// Samples and scores one group per prompt under a snapshot of the current policy.
pub fn collect_groups(state: &TrainerState, old: &PolicyParams, world: &World, batch: &[Prompt]) -> Result<Vec<ScoredGroup>, GrpoError> {
    let mut rng = step_rng(state.config.seed, state.step);
    let seeds: Vec<u64> = batch.iter().map(|_| rng.gen()).collect();
    let groups = crate::par_map(batch.len(), |k| -> Result<ScoredGroup, GrpoError> {
        let mut r = ChaCha8Rng::seed_from_u64(seeds[k]);
        let group = rollout_group(old, &state.reference, world, &batch[k], state.config.group_size, &state.generation, &mut r)?;
        let rewards = group.responses.iter().map(|resp| score(&resp.decoded, &group.prompt.queries, &state.reward)).collect::<Result<Vec<_>, _>>()?;
        let finals: Vec<f64> = rewards.iter().map(|r| r.final_reward).collect();
        let advantages = compute_advantages(&finals, state.config.adv_eps)?;
        Ok(ScoredGroup { group, rewards, advantages })
    });
    groups.into_iter().collect()
}

/// Rollouts, rewards, advantages, then `inner_epochs` clipped ascent steps.
pub fn train_step(state: &mut TrainerState, world: &World, batch: &[Prompt]) -> Result<StepReport, GrpoError> {
    if batch.is_empty() {
        return Err(GrpoError::EmptyBatch);
    }
    let (old, _) = snapshot_policies(state);
    let groups = collect_groups(state, &old, world, batch)?;

    let reports: Vec<_> = groups.iter().flat_map(|g| g.rewards.iter()).collect();
    let n = reports.len() as f64;
    let mean = |f: &dyn Fn(&crate::reward::RewardReport) -> f64| reports.iter().map(|r| f(r)).sum::<f64>() / n;
    let responses: Vec<_> = groups.iter().flat_map(|g| g.group.responses.iter()).collect();
    let cot_lens: Vec<usize> = responses.iter().map(|r| r.semantic.tokens.len()).collect();
    let mut kl_sum = 0.0;
    let mut kl_count = 0usize;
    for r in &responses {
        for (o, f) in r.old.logp.iter().zip(&r.reference.logp) {
            kl_sum += k3(f - o);
            kl_count += 1;
        }
    }

    let mut report = StepReport {
        step: state.step,
        mean_reward: mean(&|r| r.final_reward),
        hpm: mean(&|r| r.hpm),
        det: mean(&|r| r.det),
        vqa: mean(&|r| r.vqa),
        orm: mean(&|r| r.orm),
        objective: 0.0,
        mean_kl: kl_sum / kl_count.max(1) as f64,
        clip_fraction: 0.0,
        grad_norm: 0.0,
        applied_grad_norm: 0.0,
        cot_len_mean: cot_lens.iter().sum::<usize>() as f64 / n,
        cot_len_max: cot_lens.iter().copied().max().unwrap_or(0),
        truncated_fraction: responses.iter().filter(|r| r.semantic.truncated).count() as f64 / n,
    };

    if state.config.mode.trains() {
        let cfg = state.config.objective();
        for epoch in 0..state.config.inner_epochs {
            let out = grpo_objective(&groups, &state.params, &world.instruction, &state.generation, &cfg, true)?;
            let mut grad = out.grad.expect("gradient requested");
            let (pre, post) = clip_grad_norm(&mut grad, state.config.max_grad_norm);
            state.optimizer.ascend(&mut state.params, &grad, state.config.lr);
            if !state.params.is_finite() {
                return Err(GrpoError::NonFiniteObjective);
            }
            if epoch == 0 {
                report.objective = out.objective;
                report.grad_norm = pre;
                report.applied_grad_norm = post;
            }
            report.clip_fraction = out.clip_fraction;
        }
    }
    state.step += 1;
    Ok(report)
}

/// Runs steps until `config.steps`, drawing batches from `pool`.
pub fn run_training<F>(state: &mut TrainerState, world: &World, pool: &PromptPool, mut on_step: F) -> Result<(), GrpoError>
where
    F: FnMut(&StepReport, &TrainerState) -> Result<(), GrpoError>,
{
    while state.step < state.config.steps {
        let batch = pool.batch_for_step(state.config.batch_prompts, state.config.seed, state.step);
        let report = train_step(state, world, &batch)?;
        on_step(&report, state)?;
    }
    Ok(())
}
