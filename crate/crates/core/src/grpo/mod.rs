//! Group-relative policy optimization over both response segments.

mod objective;
mod optim;
mod trainer;

use thiserror::Error;

use crate::policy::PolicyError;
use crate::reward::RewardError;
use crate::rollout::RolloutError;

pub use objective::{
    compute_advantages, grpo_objective, importance_ratio, k3, kl_estimate, position_term, AblationMode, AdvantageSet, ObjectiveConfig, ObjectiveOutput,
    PositionTerm, ScoredGroup,
};
pub use optim::{clip_grad_norm, Optimizer, OptimizerKind};
pub use trainer::{collect_groups, run_training, snapshot_policies, train_step, Preset, PromptPool, StepReport, TrainerConfig, TrainerState};

#[derive(Debug, Error)]
pub enum GrpoError {
    #[error("a group needs at least 2 responses, got {0}")]
    GroupTooSmall(usize),
    #[error("traces are misaligned ({left} vs {right} positions, at {position})")]
    MisalignedTraces { left: usize, right: usize, position: usize },
    #[error("objective or gradient is not finite; training diverged")]
    NonFiniteObjective,
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid trainer config: {0}")]
    Config(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Rollout(#[from] RolloutError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::LogProbTrace;

    #[test]
    fn advantage_examples() {
        let a = compute_advantages(&[1.0, 0.0, 1.0, 0.0], 1e-8).unwrap();
        assert_eq!(a.advantages, vec![1.0, -1.0, 1.0, -1.0]);
        assert_eq!((a.mean, a.std), (0.5, 0.5));
        let flat = compute_advantages(&[0.3; 5], 1e-8).unwrap();
        assert!(flat.advantages.iter().all(|&x| x == 0.0));
        assert!(matches!(compute_advantages(&[1.0], 1e-8), Err(GrpoError::GroupTooSmall(1))));
    }

    #[test]
    fn ratio_and_kl_examples() {
        let t = |v: Vec<f64>| LogProbTrace { logp: v, dists: None };
        let new = t(vec![-1.0, 2f64.ln() - 3.0]);
        let old = t(vec![-1.0, -3.0]);
        assert_eq!(importance_ratio(&new, &old, 0, 1).unwrap(), 1.0);
        assert!((importance_ratio(&new, &old, 1, 1).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(importance_ratio(&new, &t(vec![0.0]), 0, 0), Err(GrpoError::MisalignedTraces { .. })));
        assert_eq!(kl_estimate(&old, &old, 1).unwrap(), 0.0);
        let r = t(vec![-1.0 + 2f64.ln(), 0.0]);
        assert!((kl_estimate(&old, &r, 0).unwrap() - (1.0 - 2f64.ln())).abs() < 1e-15);
        assert!((k3(2f64.ln()) - 0.306_852_819).abs() < 1e-9);
    }

    #[test]
    fn clipping_kills_gradient() {
        let cfg = ObjectiveConfig { clip_eps: 0.2, beta: 0.0, mode: AblationMode::Both };
        let t = position_term(0.5f64.ln() + 1.5f64.ln(), 0.5f64.ln(), 0.0, 2.0, &cfg, 1.0);
        assert!(t.clipped);
        assert_eq!(t.weight, 0.0);
        assert!((t.value - 1.2 * 2.0).abs() < 1e-12);
        let neg = position_term(0.5f64.ln(), 0.0, 0.0, -1.0, &cfg, 1.0);
        assert!(neg.clipped && neg.weight == 0.0);
        let inside = position_term(1.1f64.ln(), 0.0, 0.0, 1.0, &cfg, 4.0);
        assert!(!inside.clipped);
        assert!((inside.weight - 1.1 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn modes_parse() {
        for m in AblationMode::ALL {
            assert_eq!(m.name().parse::<AblationMode>().unwrap(), m);
        }
        assert!("all".parse::<AblationMode>().is_err());
    }
}
