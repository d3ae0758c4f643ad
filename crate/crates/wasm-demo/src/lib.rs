//! Browser bindings: sample rollout groups from a policy, score hand-drawn
//! grids against a prompt and measure the Vendi diversity of a set of grids.
//!
//! Every call returns a JSON string. Errors surface as thrown JS strings.

use bicot::eval::vendi_score;
use bicot::grpo::Preset;
use bicot::policy::{checkpoint, VocabLayout};
use bicot::reward::{render_scene, score, RewardConfig, RewardReport};
use bicot::rollout::{member_rng, sample_grid, GenConfig, Prompt};
use bicot::{GridImage, PolicyParams, World};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct Sample {
    pub plan: String,
    pub grid: String,
    pub pretty: String,
    pub rewards: RewardReport,
}

#[derive(Debug, Serialize)]
pub struct GroupResult {
    pub prompt: String,
    pub samples: Vec<Sample>,
    pub mean_reward: f64,
    pub vendi: f64,
}

#[derive(Debug, Serialize)]
pub struct ScoreResult {
    pub prompt: String,
    pub rewards: RewardReport,
    pub reference: String,
}

#[wasm_bindgen]
pub struct Demo {
    world: World,
    params: PolicyParams,
    gen: GenConfig,
    reward: RewardConfig,
}

fn js<E: ToString>(e: E) -> JsValue {
    JsValue::from_str(&e.to_string())
}

impl Demo {
    pub fn native(seed: u64) -> Self {
        let world = World::default_world();
        let preset = Preset::desk();
        let params = PolicyParams::init(preset.model, &world.vocab, seed);
        Self { world, params, gen: preset.generation, reward: preset.reward }
    }

    pub fn load(&mut self, bytes: &[u8]) -> Result<String, String> {
        let params = checkpoint::decode(bytes).map_err(|e| e.to_string())?;
        if *params.layout() != VocabLayout::from(&self.world.vocab) {
            return Err("checkpoint vocabulary does not match the default grammar".into());
        }
        let cfg = *params.config();
        let side = (cfg.image_len as f64).sqrt() as usize;
        if side * side != cfg.image_len {
            return Err(format!("image length {} is not a square grid", cfg.image_len));
        }
        self.gen.height = side;
        self.gen.width = side;
        self.params = params;
        Ok(format!("d_model {}, d_hidden {}, {side}x{side} grid", cfg.d_model, cfg.d_hidden))
    }

    pub fn sample_group(&self, prompt: &str, g: usize, seed: u64, greedy: bool) -> Result<GroupResult, String> {
        if g == 0 || g > 64 {
            return Err(format!("group size must be in 1..=64, got {g}"));
        }
        let p = Prompt::parse(&self.world, prompt).map_err(|e| e.to_string())?;
        let mut gen = self.gen;
        if greedy {
            gen.text_temperature = 0.0;
            gen.image_temperature = 0.0;
        }
        let shapes = self.world.grammar.shape_names();
        let colors = self.world.grammar.color_names();
        let mut samples = Vec::with_capacity(g);
        let mut grids = Vec::with_capacity(g);
        for i in 0..g {
            let (plan, _, grid) = sample_grid(&self.params, &self.world, &p, &gen, &mut member_rng(seed, i)).map_err(|e| e.to_string())?;
            let rewards = score(&grid, &p.queries, &self.reward).map_err(|e| e.to_string())?;
            let plan: Vec<String> = plan.tokens.iter().map(|&t| self.world.vocab.render_token(t)).collect();
            samples.push(Sample { plan: plan.join(" "), grid: grid.to_text(&self.world.vocab), pretty: grid.to_pretty(&shapes, &colors), rewards });
            grids.push(grid);
        }
        let mean_reward = samples.iter().map(|s| s.rewards.final_reward).sum::<f64>() / g as f64;
        let vendi = vendi_score(&grids).map_err(|e| e.to_string())?;
        Ok(GroupResult { prompt: p.text, samples, mean_reward, vendi })
    }

    pub fn score_grid(&self, prompt: &str, grid: &str) -> Result<ScoreResult, String> {
        let p = Prompt::parse(&self.world, prompt).map_err(|e| e.to_string())?;
        let grid = GridImage::from_text(grid, &self.world.vocab).map_err(|e| e.to_string())?;
        let rewards = score(&grid, &p.queries, &self.reward).map_err(|e| e.to_string())?;
        let reference = render_scene(&p.queries, grid.height(), grid.width()).to_text(&self.world.vocab);
        Ok(ScoreResult { prompt: p.text, rewards, reference })
    }

    /// Grids separated by blank lines.
    pub fn vendi(&self, grids: &str) -> Result<f64, String> {
        let blocks: Vec<GridImage> =
            split_blocks(grids).iter().map(|b| GridImage::from_text(b, &self.world.vocab)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
        vendi_score(&blocks).map_err(|e| e.to_string())
    }
}

fn split_blocks(text: &str) -> Vec<String> {
    let mut blocks = vec![];
    let mut cur = String::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !cur.is_empty() {
                blocks.push(std::mem::take(&mut cur));
            }
        } else {
            cur.push_str(line);
            cur.push('\n');
        }
    }
    if !cur.is_empty() {
        blocks.push(cur);
    }
    blocks
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> Demo {
        Self::native(seed as u64)
    }

    #[wasm_bindgen(js_name = loadCheckpoint)]
    pub fn load_checkpoint(&mut self, bytes: &[u8]) -> Result<String, JsValue> {
        self.load(bytes).map_err(js)
    }

    pub fn rollout(&self, prompt: &str, g: u32, seed: u32, greedy: bool) -> Result<String, JsValue> {
        let out = self.sample_group(prompt, g as usize, seed as u64, greedy).map_err(js)?;
        serde_json::to_string(&out).map_err(js)
    }

    #[wasm_bindgen(js_name = scoreGrid)]
    pub fn score_grid_json(&self, prompt: &str, grid: &str) -> Result<String, JsValue> {
        let out = self.score_grid(prompt, grid).map_err(js)?;
        serde_json::to_string(&out).map_err(js)
    }

    #[wasm_bindgen(js_name = vendiScore)]
    pub fn vendi_js(&self, grids: &str) -> Result<f64, JsValue> {
        self.vendi(grids).map_err(js)
    }

    /// `index: name` lines for the cell codes, background first.
    pub fn legend(&self) -> String {
        let shapes = self.world.grammar.shape_names();
        let colors = self.world.grammar.color_names();
        let mut out = String::from("0: background\n");
        for (s, shape) in shapes.iter().enumerate() {
            for (c, color) in colors.iter().enumerate() {
                out.push_str(&format!("{}: {color} {shape}\n", 1 + s * colors.len() + c));
            }
        }
        out
    }

    #[wasm_bindgen(js_name = gridSide)]
    pub fn grid_side(&self) -> u32 {
        self.gen.height as u32
    }
}
