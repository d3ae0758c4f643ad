use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{eval_suite, BenchmarkSuite, Category, EvalError};
use crate::domain::World;
use crate::grpo::{run_training, AblationMode, Preset, PromptPool, StepReport, TrainerState};
use crate::policy::PolicyParams;
use crate::reward::{ExpertMask, RewardConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub preset: Preset,
    pub modes: Vec<AblationMode>,
    pub seeds: Vec<u64>,
    pub steps: u64,
    /// Images per prompt for scoring and diversity.
    pub n_images: usize,
    pub eval_seed: u64,
}

impl AblationSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.modes.is_empty() || self.seeds.is_empty() {
            return Err(EvalError::Config("need at least one mode and one seed".into()));
        }
        if self.modes.iter().collect::<BTreeSet<_>>().len() != self.modes.len() {
            return Err(EvalError::Config("duplicate modes".into()));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(EvalError::Config("duplicate seeds".into()));
        }
        if self.n_images == 0 {
            return Err(EvalError::Config("n_images must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub mode: AblationMode,
    pub seed: u64,
    pub overall: f64,
    pub categories: BTreeMap<Category, f64>,
    pub vendi: f64,
    /// Mean training reward over the first and last 20 steps.
    pub train_reward_first: f64,
    pub train_reward_last: f64,
    #[serde(skip)]
    pub history: Vec<StepReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingCheck {
    pub claim: String,
    pub left: f64,
    pub right: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    pub checks: Vec<OrderingCheck>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn window_mean(h: &[StepReport], last: bool) -> f64 {
    let k = h.len().min(20);
    if k == 0 {
        return f64::NAN;
    }
    let w = if last { &h[h.len() - k..] } else { &h[..k] };
    w.iter().map(|r| r.mean_reward).sum::<f64>() / k as f64
}

impl AblationReport {
    pub fn median_overall(&self, mode: AblationMode) -> Option<f64> {
        let xs: Vec<f64> = self.rows.iter().filter(|r| r.mode == mode).map(|r| r.overall).collect();
        (!xs.is_empty()).then(|| median(xs))
    }

    pub fn median_vendi(&self, with_cot: bool) -> Option<f64> {
        let xs: Vec<f64> = self.rows.iter().filter(|r| r.mode.uses_cot() == with_cot).map(|r| r.vendi).collect();
        (!xs.is_empty()).then(|| median(xs))
    }

    fn compute_checks(&mut self) {
        use AblationMode::*;
        let pairs = [(Both, SemanticOnly), (Both, TokenOnly), (Both, None), (SemanticOnly, None), (TokenOnly, None)];
        self.checks.clear();
        for (a, b) in pairs {
            if let (Some(l), Some(r)) = (self.median_overall(a), self.median_overall(b)) {
                self.checks.push(OrderingCheck { claim: format!("median score {a} >= {b}"), left: l, right: r, holds: l >= r });
            }
        }
        if let (Some(l), Some(r)) = (self.median_vendi(true), self.median_vendi(false)) {
            self.checks.push(OrderingCheck { claim: "median vendi with plan > without".into(), left: l, right: r, holds: l > r });
        }
    }

    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    /// Per-mode medians in the layout mode x category x diversity, then the checks.
    pub fn summary_table(&self) -> String {
        let modes: BTreeSet<AblationMode> = self.rows.iter().map(|r| r.mode).collect();
        let cats: BTreeSet<Category> = self.rows.iter().flat_map(|r| r.categories.keys().copied()).collect();
        let mut out = String::new();
        write!(out, "{:<14}", "mode").unwrap();
        for c in &cats {
            write!(out, " {:>9}", c.name()).unwrap();
        }
        writeln!(out, " {:>9} {:>9} {:>5}", "overall", "vendi", "runs").unwrap();
        for m in &modes {
            let rows: Vec<&AblationRow> = self.rows.iter().filter(|r| r.mode == *m).collect();
            write!(out, "{:<14}", m.name()).unwrap();
            for c in &cats {
                write!(out, " {:>9.4}", median(rows.iter().filter_map(|r| r.categories.get(c).copied()).collect())).unwrap();
            }
            let overall = median(rows.iter().map(|r| r.overall).collect());
            let vendi = median(rows.iter().map(|r| r.vendi).collect());
            writeln!(out, " {:>9.4} {:>9.4} {:>5}", overall, vendi, rows.len()).unwrap();
        }
        for c in &self.checks {
            let flag = if c.holds { "ok" } else { "FAILED" };
            writeln!(out, "[{flag}] {} ({:.4} vs {:.4})", c.claim, c.left, c.right).unwrap();
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let cats: BTreeSet<Category> = self.rows.iter().flat_map(|r| r.categories.keys().copied()).collect();
        let mut out = String::from("mode,seed");
        for c in &cats {
            write!(out, ",{}", c.name()).unwrap();
        }
        out.push_str(",overall,vendi,train_reward_first,train_reward_last\n");
        for r in &self.rows {
            write!(out, "{},{}", r.mode, r.seed).unwrap();
            for c in &cats {
                write!(out, ",{}", r.categories.get(c).copied().unwrap_or(f64::NAN)).unwrap();
            }
            writeln!(out, ",{},{},{},{}", r.overall, r.vendi, r.train_reward_first, r.train_reward_last).unwrap();
        }
        out
    }
}

/// Trains one run per (mode, seed) from `base` and evaluates each on `suite`.
/// Modes that leave the plan unoptimized generate without a plan; `none`
/// does no training.
pub fn run_ablation(base: &PolicyParams, world: &World, pool: &PromptPool, suite: &BenchmarkSuite, spec: &AblationSpec) -> Result<AblationReport, EvalError> {
    spec.validate()?;
    suite.check_disjoint(pool)?;
    let runs: Vec<(AblationMode, u64)> = spec.modes.iter().flat_map(|&m| spec.seeds.iter().map(move |&s| (m, s))).collect();
    let rows = crate::par_map(runs.len(), |k| -> Result<AblationRow, EvalError> {
        let (mode, seed) = runs[k];
        let trainer = crate::grpo::TrainerConfig { mode, seed, steps: if mode.trains() { spec.steps } else { 0 }, ..spec.preset.trainer };
        let generation = crate::rollout::GenConfig { use_cot: mode.uses_cot(), ..spec.preset.generation };
        let mut state = TrainerState::new(base.clone(), trainer, generation, spec.preset.reward)?;
        let mut history = Vec::new();
        run_training(&mut state, world, pool, |r, _| {
            history.push(r.clone());
            Ok(())
        })?;
        let report = eval_suite(&state.params, world, suite, spec.n_images, &generation, &spec.preset.reward, spec.eval_seed)?;
        Ok(AblationRow {
            mode,
            seed,
            overall: report.overall,
            categories: report.categories.iter().map(|(c, s)| (*c, s.final_reward)).collect(),
            vendi: report.diversity.mean,
            train_reward_first: window_mean(&history, false),
            train_reward_last: window_mean(&history, true),
            history,
        })
    });
    let mut report = AblationReport { rows: rows.into_iter().collect::<Result<_, _>>()?, checks: vec![] };
    report.compute_checks();
    Ok(report)
}

/// One reward-mask training run, scored afterwards under the full ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRow {
    pub mask: String,
    pub seed: u64,
    pub overall: f64,
    pub hpm: f64,
    pub det: f64,
    pub vqa: f64,
    pub orm: f64,
    pub vendi: f64,
    pub train_reward_first: f64,
    pub train_reward_last: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskReport {
    pub rows: Vec<MaskRow>,
}

impl MaskReport {
    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{:<6} {:>6} {:>9} {:>7} {:>7} {:>7} {:>7} {:>7}", "mask", "seed", "overall", "hpm", "det", "vqa", "orm", "vendi").unwrap();
        for r in &self.rows {
            writeln!(out, "{:<6} {:>6} {:>9.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4}", r.mask, r.seed, r.overall, r.hpm, r.det, r.vqa, r.orm, r.vendi)
                .unwrap();
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("mask,seed,overall,hpm,det,vqa,orm,vendi,train_reward_first,train_reward_last\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.mask, r.seed, r.overall, r.hpm, r.det, r.vqa, r.orm, r.vendi, r.train_reward_first, r.train_reward_last
            )
            .unwrap();
        }
        out
    }
}

/// Trains with each reward mask in turn. Every run is evaluated under the
/// full ensemble so the reports share one scale.
pub fn run_mask_sweep(
    base: &PolicyParams,
    world: &World,
    pool: &PromptPool,
    suite: &BenchmarkSuite,
    spec: &AblationSpec,
    masks: &[ExpertMask],
) -> Result<MaskReport, EvalError> {
    spec.validate()?;
    suite.check_disjoint(pool)?;
    if masks.is_empty() || masks.iter().any(|m| !m.any()) {
        return Err(EvalError::Config("every mask must enable at least one expert".into()));
    }
    let runs: Vec<(ExpertMask, u64)> = masks.iter().flat_map(|&m| spec.seeds.iter().map(move |&s| (m, s))).collect();
    let full = RewardConfig { mask: ExpertMask::default(), ..spec.preset.reward };
    let rows = crate::par_map(runs.len(), |k| -> Result<MaskRow, EvalError> {
        let (mask, seed) = runs[k];
        let trainer = crate::grpo::TrainerConfig { seed, steps: spec.steps, ..spec.preset.trainer };
        let reward = RewardConfig { mask, ..spec.preset.reward };
        let mut state = TrainerState::new(base.clone(), trainer, spec.preset.generation, reward)?;
        let mut history = Vec::new();
        run_training(&mut state, world, pool, |r, _| {
            history.push(r.clone());
            Ok(())
        })?;
        let report = eval_suite(&state.params, world, suite, spec.n_images, &spec.preset.generation, &full, spec.eval_seed)?;
        let n = report.categories.len() as f64;
        let avg = |f: fn(&super::CategoryScore) -> f64| report.categories.values().map(f).sum::<f64>() / n;
        Ok(MaskRow {
            mask: mask.flags(),
            seed,
            overall: report.overall,
            hpm: avg(|c| c.hpm),
            det: avg(|c| c.det),
            vqa: avg(|c| c.vqa),
            orm: avg(|c| c.orm),
            vendi: report.diversity.mean,
            train_reward_first: window_mean(&history, false),
            train_reward_last: window_mean(&history, true),
        })
    });
    Ok(MaskReport { rows: rows.into_iter().collect::<Result<_, _>>()? })
}
