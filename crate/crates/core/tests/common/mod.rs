#![allow(dead_code)]

use bicot::grpo::{compute_advantages, ScoredGroup};
use bicot::policy::{ModelConfig, PolicyParams};
use bicot::reward::{score, RewardConfig};
use bicot::rollout::{rollout_group, GenConfig, Prompt};
use bicot::World;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const PROMPTS: [&str; 4] =
    ["a red square", "a blue circle left of a green triangle", "two yellow flowers and one red square", "a green square and a green circle"];

pub fn small_model() -> ModelConfig {
    ModelConfig { d_model: 6, d_hidden: 8, max_prefix: 32, image_len: 16 }
}

pub fn small_gen() -> GenConfig {
    GenConfig { height: 4, width: 4, max_cot_len: 4, cfg_scale: 1.0, ..GenConfig::default() }
}

pub fn prompt(world: &World, text: &str) -> Prompt {
    Prompt::parse(world, text).unwrap()
}

/// `base` plus uniform noise of the given half-width on every entry.
pub fn perturbed(base: &PolicyParams, scale: f64, rng: &mut ChaCha8Rng) -> PolicyParams {
    let mut p = base.clone();
    p.as_mut_slice().iter_mut().for_each(|x| *x += rng.gen_range(-scale..scale));
    p
}

/// Groups sampled under `old`, with random rewards standing in for the
/// ensemble so advantages are never degenerate.
pub fn random_groups(
    old: &PolicyParams,
    reference: &PolicyParams,
    world: &World,
    gen: &GenConfig,
    n_groups: usize,
    g: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<ScoredGroup> {
    (0..n_groups)
        .map(|k| {
            let p = prompt(world, PROMPTS[(k + rng.gen_range(0..PROMPTS.len())) % PROMPTS.len()]);
            let group = rollout_group(old, reference, world, &p, g, gen, rng).unwrap();
            let rewards: Vec<_> = group.responses.iter().map(|r| score(&r.decoded, &p.queries, &RewardConfig::default()).unwrap()).collect();
            let fake: Vec<f64> = (0..g).map(|_| rng.gen_range(0.0..1.0)).collect();
            let advantages = compute_advantages(&fake, 1e-8).unwrap();
            ScoredGroup { group, rewards, advantages }
        })
        .collect()
}
