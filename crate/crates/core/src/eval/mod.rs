//! Held-out benchmark suites, the Vendi diversity score and the ablation
//! runner comparing which response segments are optimized.

mod ablation;
mod suite;
mod vendi;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{GridImage, World};
use crate::grpo::GrpoError;
use crate::policy::PolicyParams;
use crate::reward::{score, RewardConfig, RewardError};
use crate::rollout::{sample_grid, GenConfig, Prompt, RolloutError};

pub use ablation::{run_ablation, run_mask_sweep, AblationReport, AblationRow, AblationSpec, MaskReport, MaskRow, OrderingCheck};
pub use suite::{training_pool, BenchmarkSuite, Category, DEFAULT_SUITE};
pub use vendi::{gram_matrix, similarity_kernel, symmetric_eigen, vendi_score};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("grids differ in size: {left:?} vs {right:?}")]
    DimensionMismatch { left: (usize, usize), right: (usize, usize) },
    #[error("nothing to evaluate")]
    Empty,
    #[error("suite line {line}: {reason}")]
    Suite { line: usize, reason: String },
    #[error("evaluation prompt `{0}` also appears in the training pool")]
    Overlap(String),
    #[error("invalid ablation: {0}")]
    Config(String),
    #[error(transparent)]
    Rollout(#[from] RolloutError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Grpo(#[from] GrpoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CategoryScore {
    #[serde(rename = "final")]
    pub final_reward: f64,
    pub hpm: f64,
    pub det: f64,
    pub vqa: f64,
    pub orm: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptDiversity {
    pub category: Category,
    pub prompt: String,
    pub vendi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub per_prompt: Vec<PromptDiversity>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub categories: BTreeMap<Category, CategoryScore>,
    /// Mean of the category scores.
    pub overall: f64,
    pub diversity: DiversityReport,
}

impl EvalReport {
    pub fn table(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{:<10} {:>7} {:>7} {:>7} {:>7} {:>7}", "category", "final", "hpm", "det", "vqa", "orm").unwrap();
        for (cat, s) in &self.categories {
            writeln!(out, "{:<10} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4}", cat.name(), s.final_reward, s.hpm, s.det, s.vqa, s.orm).unwrap();
        }
        writeln!(out, "{:<10} {:>7.4}", "overall", self.overall).unwrap();
        writeln!(out, "{:<10} {:>7.4}", "vendi", self.diversity.mean).unwrap();
        out
    }
}

/// Scores the images `generate` returns for every suite prompt. Results do
/// not depend on prompt order within a category.
pub fn eval_with<G>(suite: &BenchmarkSuite, reward: &RewardConfig, generate: G) -> Result<EvalReport, EvalError>
where
    G: Fn(&Prompt) -> Result<Vec<GridImage>, EvalError> + Sync + Send,
{
    let mut jobs: Vec<(Category, &Prompt)> = suite.categories.iter().flat_map(|(c, ps)| ps.iter().map(move |p| (*c, p))).collect();
    jobs.sort_by(|a, b| (a.0, &a.1.text).cmp(&(b.0, &b.1.text)));
    if jobs.is_empty() {
        return Err(EvalError::Empty);
    }
    let results = crate::par_map(jobs.len(), |k| -> Result<(Vec<[f64; 5]>, f64), EvalError> {
        let (_, prompt) = jobs[k];
        let images = generate(prompt)?;
        let scores =
            images.iter().map(|g| score(g, &prompt.queries, reward).map(|r| [r.final_reward, r.hpm, r.det, r.vqa, r.orm])).collect::<Result<Vec<_>, _>>()?;
        Ok((scores, vendi_score(&images)?))
    });

    let mut sums: BTreeMap<Category, ([f64; 5], usize)> = BTreeMap::new();
    let mut per_prompt = Vec::with_capacity(jobs.len());
    for ((cat, prompt), res) in jobs.iter().zip(results) {
        let (scores, vendi) = res?;
        let e = sums.entry(*cat).or_insert(([0.0; 5], 0));
        for s in &scores {
            for (acc, v) in e.0.iter_mut().zip(s) {
                *acc += v;
            }
        }
        e.1 += scores.len();
        per_prompt.push(PromptDiversity { category: *cat, prompt: prompt.text.clone(), vendi });
    }
    let categories: BTreeMap<Category, CategoryScore> = sums
        .into_iter()
        .map(|(c, (s, n))| {
            let m = |i: usize| s[i] / n as f64;
            (c, CategoryScore { final_reward: m(0), hpm: m(1), det: m(2), vqa: m(3), orm: m(4), samples: n })
        })
        .collect();
    let overall = categories.values().map(|c| c.final_reward).sum::<f64>() / categories.len() as f64;
    let mean = per_prompt.iter().map(|p| p.vendi).sum::<f64>() / per_prompt.len() as f64;
    Ok(EvalReport { categories, overall, diversity: DiversityReport { per_prompt, mean } })
}

/// Rng for evaluating one prompt, keyed by its text.
pub fn prompt_rng(seed: u64, prompt: &Prompt) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(crc32fast::hash(prompt.text.as_bytes()) as u64);
    rng
}

/// Samples `n` images per suite prompt from `params` under fixed seeds and scores them.
pub fn eval_suite(
    params: &PolicyParams,
    world: &World,
    suite: &BenchmarkSuite,
    n: usize,
    gen: &GenConfig,
    reward: &RewardConfig,
    seed: u64,
) -> Result<EvalReport, EvalError> {
    if n == 0 {
        return Err(EvalError::Empty);
    }
    gen.validate()?;
    eval_with(suite, reward, |prompt| {
        let mut rng = prompt_rng(seed, prompt);
        (0..n).map(|_| Ok(sample_grid(params, world, prompt, gen, &mut rng)?.2)).collect()
    })
}
