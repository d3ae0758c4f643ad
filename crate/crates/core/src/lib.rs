//! Joint semantic-level and token-level chain-of-thought reinforcement
//! learning for a small autoregressive image generator.
//!
//! One causal policy writes a short textual plan, then emits `h * w` image
//! tokens behind an image-start signifier. Groups of rollouts are scored by
//! an ensemble of deterministic vision-expert oracles and the policy is
//! updated with a group-relative clipped objective over both segments.

pub mod domain;
pub mod eval;
pub mod grpo;
pub mod policy;
pub mod reward;
pub mod rollout;

#[cfg(feature = "cli")]
pub mod cli;

pub use domain::{Grammar, GridImage, SceneSpec, TokenId, Vocab, World};
pub use policy::{ModelConfig, PolicyParams};

/// Order-preserving map over `0..n`, parallel when the `parallel` feature is on.
pub(crate) fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
