use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::grpo::Preset;
use crate::grpo::TrainerConfig;
use crate::policy::ModelConfig;
use crate::reward::RewardConfig;
use crate::rollout::GenConfig;

/// Environment variable that relocates relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "BICOT_OUTPUT_ROOT";

/// Everything a run needs. Loaded from TOML on top of a named preset, so a
/// file only lists the keys it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// `desk` or `paper`; supplies every value the file leaves out.
    pub preset: String,
    pub output_dir: PathBuf,
    /// Grammar asset; the bundled world when absent.
    pub grammar: Option<PathBuf>,
    /// Evaluation suite; the bundled suite when absent.
    pub suite: Option<PathBuf>,
    /// Starting policy; a fresh initialization from `trainer.seed` when absent.
    pub init_checkpoint: Option<PathBuf>,
    /// Steps between policy checkpoints and resumable state snapshots.
    pub checkpoint_every: u64,
    /// Images per prompt in the end-of-run evaluation; 0 skips it.
    pub eval_images: usize,
    pub eval_seed: u64,
    pub model: ModelConfig,
    pub trainer: TrainerConfig,
    pub generation: GenConfig,
    pub reward: RewardConfig,
}

impl RunConfig {
    pub fn from_preset(name: &str) -> Result<Self, CliError> {
        let preset = Preset::by_name(name).ok_or_else(|| CliError::Config(format!("unknown preset `{name}` (expected desk or paper)")))?;
        Ok(Self {
            preset: name.to_string(),
            output_dir: PathBuf::from(format!("runs/{name}")),
            grammar: None,
            suite: None,
            init_checkpoint: None,
            checkpoint_every: 50,
            eval_images: 10,
            eval_seed: 12345,
            model: preset.model,
            trainer: preset.trainer,
            generation: preset.generation,
            reward: preset.reward,
        })
    }

    pub fn preset(&self) -> Preset {
        Preset { model: self.model, trainer: self.trainer, generation: self.generation, reward: self.reward }
    }

    /// Parses TOML, filling unspecified keys from the preset it names.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        let name = match user.get("preset") {
            Some(toml::Value::String(s)) => s.clone(),
            Some(_) => return Err(CliError::Config("`preset` must be a string".into())),
            None => "desk".to_string(),
        };
        let base = toml::Table::try_from(Self::from_preset(&name)?).map_err(|e| CliError::Config(e.to_string()))?;
        let merged = merge(base, user);
        let cfg: RunConfig = merged.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok((Self::parse(&text)?, text))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.trainer.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.generation.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.generation.image_len() != self.model.image_len {
            return Err(CliError::Config(format!(
                "generation grid {}x{} does not match model.image_len {}",
                self.generation.height, self.generation.width, self.model.image_len
            )));
        }
        if self.model.d_model == 0 || self.model.d_hidden == 0 || self.model.max_prefix == 0 {
            return Err(CliError::Config("model dimensions must be positive".into()));
        }
        if self.checkpoint_every == 0 {
            return Err(CliError::Config("checkpoint_every must be at least 1".into()));
        }
        if !self.reward.mask.any() {
            return Err(CliError::Config("reward.mask enables no expert".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// `output_dir`, placed under the output-root variable when relative.
    pub fn resolved_output_dir(&self) -> PathBuf {
        resolve_output(&self.output_dir)
    }
}

pub fn resolve_output(dir: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
        _ => dir.to_path_buf(),
    }
}

fn merge(mut base: toml::Table, over: toml::Table) -> toml::Table {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => {
                let merged = merge(std::mem::take(b), o);
                *b = merged;
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
    base
}
