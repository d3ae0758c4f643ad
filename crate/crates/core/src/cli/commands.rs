use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{resolve_output, RunConfig};
use super::{AblateArgs, CliError, EvalArgs, InspectArgs, RolloutArgs, TrainArgs};
use crate::domain::World;
use crate::eval::{eval_suite, run_ablation, run_mask_sweep, training_pool, AblationSpec, BenchmarkSuite};
use crate::grpo::{train_step, AblationMode, Preset, PromptPool, StepReport, TrainerState};
use crate::policy::checkpoint::FORMAT_VERSION;
use crate::policy::{load_checkpoint, save_checkpoint, PolicyParams, VocabLayout, TENSOR_NAMES};
use crate::reward::ExpertMask;
use crate::rollout::{rollout_group, GenConfig, Prompt, RolloutRecord};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const METRICS_CSV: &str = "metrics.csv";
pub const STATE_DIR: &str = "state";
pub const CHECKPOINT_DIR: &str = "checkpoints";
const CONFIG_FILE: &str = "config.toml";
const RESOLVED_FILE: &str = "resolved.toml";
const METRICS_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Stopped,
    Complete,
}

/// Everything needed to repeat a run: resolved config, seed, versions and
/// checksums of the grammar and suite, plus an index of what the run wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub crate_version: String,
    pub checkpoint_format: u32,
    pub metrics_format: u32,
    pub seed: u64,
    pub grammar_crc32: u32,
    pub suite_crc32: u32,
    pub config: RunConfig,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    pub status: RunStatus,
    pub step: u64,
    pub checkpoints: Vec<String>,
    pub metrics: Vec<String>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_manifest(dir: &Path, m: &RunManifest) -> Result<(), CliError> {
    write_atomic(&dir.join(MANIFEST_FILE), serde_json::to_string_pretty(m).expect("manifest serializes").as_bytes())
}

/// World plus the text of its grammar asset.
fn load_world(cfg: Option<&RunConfig>) -> Result<(World, String), CliError> {
    match cfg.and_then(|c| c.grammar.as_ref()) {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let world = World::from_asset(&text).map_err(|e| CliError::Grammar(e.to_string()))?;
            Ok((world, text))
        }
        None => Ok((World::default_world(), crate::domain::DEFAULT_ASSET.to_string())),
    }
}

fn load_suite(path: Option<&Path>, world: &World) -> Result<(BenchmarkSuite, String), CliError> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        None => crate::eval::DEFAULT_SUITE.to_string(),
    };
    let suite = BenchmarkSuite::parse(&text, world).map_err(|e| CliError::Config(e.to_string()))?;
    Ok((suite, text))
}

fn load_params(path: &Path, world: &World) -> Result<PolicyParams, CliError> {
    let params = load_checkpoint(path).map_err(|e| CliError::Checkpoint { path: path.to_path_buf(), reason: e.to_string() })?;
    if *params.layout() != VocabLayout::from(&world.vocab) {
        return Err(CliError::Checkpoint { path: path.to_path_buf(), reason: "vocabulary layout does not match the grammar".into() });
    }
    Ok(params)
}

fn initial_params(cfg: &RunConfig, world: &World) -> Result<PolicyParams, CliError> {
    let params = match &cfg.init_checkpoint {
        Some(p) => load_params(p, world)?,
        None => PolicyParams::init(cfg.model, &world.vocab, cfg.trainer.seed),
    };
    if *params.config() != cfg.model {
        return Err(CliError::Config("init_checkpoint does not match [model]".into()));
    }
    Ok(params)
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn checkpoint_name(step: u64) -> String {
    format!("{CHECKPOINT_DIR}/step_{step:06}.bcot")
}

const CSV_HEADER: &str =
    "step,mean_reward,hpm,det,vqa,orm,objective,mean_kl,clip_fraction,grad_norm,applied_grad_norm,cot_len_mean,cot_len_max,truncated_fraction\n";

fn csv_line(r: &StepReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        r.step,
        r.mean_reward,
        r.hpm,
        r.det,
        r.vqa,
        r.orm,
        r.objective,
        r.mean_kl,
        r.clip_fraction,
        r.grad_norm,
        r.applied_grad_norm,
        r.cot_len_mean,
        r.cot_len_max,
        r.truncated_fraction
    )
}

/// Metrics recorded before `step`; later lines belong to work the saved state never saw.
fn read_metrics(dir: &Path, step: u64) -> Result<Vec<(String, StepReport)>, CliError> {
    let path = dir.join(METRICS_FILE);
    if !path.exists() {
        return Ok(vec![]);
    }
    let mut out = Vec::new();
    for line in BufReader::new(fs::File::open(&path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<StepReport>(&line) {
            Ok(r) if r.step < step => out.push((line, r)),
            Ok(_) => {}
            // a torn final line from an interrupted write
            Err(_) => break,
        }
    }
    Ok(out)
}

fn rewrite_metrics(dir: &Path, history: &[(String, StepReport)]) -> Result<(), CliError> {
    let mut jsonl = String::new();
    let mut csv = String::from(CSV_HEADER);
    for (line, r) in history {
        jsonl.push_str(line);
        jsonl.push('\n');
        csv.push_str(&csv_line(r));
    }
    write_atomic(&dir.join(METRICS_FILE), jsonl.as_bytes())?;
    write_atomic(&dir.join(METRICS_CSV), csv.as_bytes())
}

fn append(path: &Path, text: &str) -> Result<(), CliError> {
    use std::io::Write;
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

fn list_checkpoints(dir: &Path) -> Result<Vec<String>, CliError> {
    let mut names: Vec<String> = match fs::read_dir(dir.join(CHECKPOINT_DIR)) {
        Ok(rd) => rd
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".bcot"))
            .map(|n| format!("{CHECKPOINT_DIR}/{n}"))
            .collect(),
        Err(_) => vec![],
    };
    names.sort();
    Ok(names)
}

pub fn train(args: &TrainArgs) -> Result<(), CliError> {
    let (cfg, verbatim) = RunConfig::load(&args.config)?;
    let (world, grammar_text) = load_world(Some(&cfg))?;
    let (suite, suite_text) = load_suite(cfg.suite.as_deref(), &world)?;
    let pool = training_pool(&world, &suite);
    let dir = cfg.resolved_output_dir();
    fs::create_dir_all(dir.join(CHECKPOINT_DIR))?;
    let resolved = cfg.to_toml();
    let state_dir = dir.join(STATE_DIR);

    let resuming = state_dir.join("trainer.json").exists();
    let mut state = if resuming {
        let saved = fs::read_to_string(dir.join(RESOLVED_FILE)).unwrap_or_default();
        if saved != resolved {
            return Err(CliError::Config(format!("{} holds a run with a different config", dir.display())));
        }
        let state = TrainerState::load(&state_dir, cfg.trainer, cfg.generation, cfg.reward)
            .map_err(|e| CliError::Checkpoint { path: state_dir.clone(), reason: e.to_string() })?;
        if state.params.layout() != &VocabLayout::from(&world.vocab) || *state.params.config() != cfg.model {
            return Err(CliError::Checkpoint { path: state_dir.clone(), reason: "saved state does not match the config".into() });
        }
        state
    } else {
        let params = initial_params(&cfg, &world)?;
        let state = TrainerState::new(params, cfg.trainer, cfg.generation, cfg.reward).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.generation.image_len() > state.params.config().image_len {
            return Err(CliError::Config("grid larger than the model's image positions".into()));
        }
        state
    };
    write_atomic(&dir.join(CONFIG_FILE), verbatim.as_bytes())?;
    write_atomic(&dir.join(RESOLVED_FILE), resolved.as_bytes())?;
    let history = read_metrics(&dir, state.step)?;
    rewrite_metrics(&dir, &history)?;

    let started = match fs::read_to_string(dir.join(MANIFEST_FILE)).ok().and_then(|t| serde_json::from_str::<RunManifest>(&t).ok()) {
        Some(m) if resuming => m.started_unix,
        _ => now(),
    };
    let mut manifest = RunManifest {
        command: "train".into(),
        crate_version: env!("CARGO_PKG_VERSION").into(),
        checkpoint_format: FORMAT_VERSION,
        metrics_format: METRICS_VERSION,
        seed: cfg.trainer.seed,
        grammar_crc32: crc32fast::hash(grammar_text.as_bytes()),
        suite_crc32: crc32fast::hash(suite_text.as_bytes()),
        config: cfg.clone(),
        started_unix: started,
        finished_unix: None,
        status: RunStatus::Running,
        step: state.step,
        checkpoints: vec![],
        metrics: vec![METRICS_FILE.into(), METRICS_CSV.into()],
    };
    let save = |state: &TrainerState, manifest: &mut RunManifest| -> Result<(), CliError> {
        save_checkpoint(&state.params, &dir.join(checkpoint_name(state.step))).map_err(runtime)?;
        state.save(&state_dir).map_err(runtime)?;
        manifest.step = state.step;
        manifest.checkpoints = list_checkpoints(&dir)?;
        write_manifest(&dir, manifest)
    };
    if !resuming {
        save(&state, &mut manifest)?;
    } else {
        manifest.checkpoints = list_checkpoints(&dir)?;
        write_manifest(&dir, &manifest)?;
    }

    let mut done = 0u64;
    while state.step < cfg.trainer.steps {
        if args.stop_after.is_some_and(|n| done >= n) {
            break;
        }
        let batch = pool.batch_for_step(cfg.trainer.batch_prompts, cfg.trainer.seed, state.step);
        let report = train_step(&mut state, &world, &batch).map_err(runtime)?;
        append(&dir.join(METRICS_FILE), &(serde_json::to_string(&report).expect("report serializes") + "\n"))?;
        append(&dir.join(METRICS_CSV), &csv_line(&report))?;
        println!(
            "step {:>5} reward {:.4} hpm {:.3} det {:.3} vqa {:.3} orm {:.3} kl {:.4} grad {:.3}",
            report.step, report.mean_reward, report.hpm, report.det, report.vqa, report.orm, report.mean_kl, report.grad_norm
        );
        done += 1;
        if state.step % cfg.checkpoint_every == 0 || state.step == cfg.trainer.steps {
            save(&state, &mut manifest)?;
        }
    }
    if state.step < cfg.trainer.steps {
        save(&state, &mut manifest)?;
        manifest.status = RunStatus::Stopped;
        manifest.finished_unix = Some(now());
        write_manifest(&dir, &manifest)?;
        println!("stopped at step {}; rerun to resume", state.step);
        return Ok(());
    }

    if cfg.eval_images > 0 && cfg.trainer.steps > 0 {
        let report = eval_suite(&state.params, &world, &suite, cfg.eval_images, &cfg.generation, &cfg.reward, cfg.eval_seed).map_err(runtime)?;
        write_atomic(&dir.join("eval.json"), serde_json::to_string_pretty(&report).expect("report serializes").as_bytes())?;
        write_atomic(&dir.join("eval.txt"), report.table().as_bytes())?;
        manifest.metrics.extend(["eval.json".to_string(), "eval.txt".to_string()]);
        print!("{}", report.table());
    }
    manifest.status = RunStatus::Complete;
    manifest.finished_unix = Some(now());
    manifest.step = state.step;
    manifest.checkpoints = list_checkpoints(&dir)?;
    write_manifest(&dir, &manifest)
}

/// Config from an optional file, else the `desk` preset.
fn optional_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => Ok(RunConfig::load(p)?.0),
        None => RunConfig::from_preset("desk"),
    }
}

fn check_grid(gen: &GenConfig, params: &PolicyParams) -> Result<(), CliError> {
    if gen.image_len() > params.config().image_len {
        return Err(CliError::Config(format!("grid {}x{} exceeds the checkpoint's {} image positions", gen.height, gen.width, params.config().image_len)));
    }
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    if args.n == 0 {
        return Err(CliError::Config("--n must be at least 1".into()));
    }
    let cfg = optional_config(args.config.as_deref())?;
    let (world, _) = load_world(Some(&cfg))?;
    let suite_path = args.suite.as_deref().or(cfg.suite.as_deref());
    let (suite, _) = load_suite(suite_path, &world)?;
    let params = load_params(&args.ckpt, &world)?;
    check_grid(&cfg.generation, &params)?;
    let report = eval_suite(&params, &world, &suite, args.n, &cfg.generation, &cfg.reward, args.seed).map_err(runtime)?;
    let table = report.table();
    if let Some(out) = &args.out {
        let out = resolve_output(out);
        fs::create_dir_all(&out)?;
        write_atomic(&out.join("eval.json"), serde_json::to_string_pretty(&report).expect("report serializes").as_bytes())?;
        write_atomic(&out.join("eval.txt"), table.as_bytes())?;
    }
    print!("{table}");
    Ok(())
}

pub fn ablate(args: &AblateArgs) -> Result<(), CliError> {
    let (cfg, _) = RunConfig::load(&args.config)?;
    let (world, _) = load_world(Some(&cfg))?;
    let (suite, _) = load_suite(cfg.suite.as_deref(), &world)?;
    let pool: PromptPool = training_pool(&world, &suite);
    let base = initial_params(&cfg, &world)?;
    let modes = args.modes.iter().map(|m| m.trim().parse::<AblationMode>().map_err(CliError::Config)).collect::<Result<Vec<_>, _>>()?;
    let spec = AblationSpec {
        preset: Preset { model: cfg.model, trainer: cfg.trainer, generation: cfg.generation, reward: cfg.reward },
        modes,
        seeds: args.seeds.clone(),
        steps: cfg.trainer.steps,
        n_images: cfg.eval_images.max(1),
        eval_seed: cfg.eval_seed,
    };
    spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let dir = cfg.resolved_output_dir();

    if let Some(masks) = &args.masks {
        let masks = masks
            .iter()
            .map(|m| ExpertMask::from_flags(m.trim()).ok_or_else(|| CliError::Config(format!("bad reward mask `{m}` (use letters H, D, V, O)"))))
            .collect::<Result<Vec<_>, _>>()?;
        let spec = AblationSpec { modes: vec![AblationMode::Both], ..spec };
        let report = run_mask_sweep(&base, &world, &pool, &suite, &spec, &masks).map_err(runtime)?;
        let out = dir.join("reward_masks");
        fs::create_dir_all(&out)?;
        write_atomic(&out.join("report.json"), serde_json::to_string_pretty(&report).expect("report serializes").as_bytes())?;
        write_atomic(&out.join("summary.txt"), report.summary_table().as_bytes())?;
        write_atomic(&out.join("masks.csv"), report.to_csv().as_bytes())?;
        print!("{}", report.summary_table());
        return Ok(());
    }

    let report = run_ablation(&base, &world, &pool, &suite, &spec).map_err(runtime)?;
    let out = dir.join("ablation");
    fs::create_dir_all(&out)?;
    let summary = report.summary_table();
    write_atomic(&out.join("report.json"), serde_json::to_string_pretty(&report).expect("report serializes").as_bytes())?;
    write_atomic(&out.join("summary.txt"), summary.as_bytes())?;
    write_atomic(&out.join("ablation.csv"), report.to_csv().as_bytes())?;
    print!("{summary}");
    Ok(())
}

pub fn rollout(args: &RolloutArgs) -> Result<(), CliError> {
    if args.g == 0 {
        return Err(CliError::Config("--g must be at least 1".into()));
    }
    let cfg = optional_config(args.config.as_deref())?;
    let (world, _) = load_world(Some(&cfg))?;
    let prompt = Prompt::parse(&world, &args.prompt).map_err(|e| CliError::Grammar(e.to_string()))?;
    let params = load_params(&args.ckpt, &world)?;
    let mut gen = cfg.generation;
    if args.greedy {
        gen.text_temperature = 0.0;
        gen.image_temperature = 0.0;
    }
    check_grid(&gen, &params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let group = rollout_group(&params, &params, &world, &prompt, args.g, &gen, &mut rng).map_err(runtime)?;
    let mut dump = String::new();
    let mut shown = String::new();
    for (i, resp) in group.responses.iter().enumerate() {
        let rec = RolloutRecord::new(&world, &prompt, resp, &cfg.reward).map_err(runtime)?;
        dump.push_str(&rec.to_json_line());
        dump.push('\n');
        let r = &rec.rewards;
        writeln!(shown, "# response {i}").unwrap();
        writeln!(shown, "plan: {}{}", rec.cot_text, if rec.truncated { " [truncated]" } else { "" }).unwrap();
        shown.push_str(&rec.grid);
        if !rec.grid.ends_with('\n') {
            shown.push('\n');
        }
        writeln!(shown, "reward {:.4} (hpm {:.4} det {:.4} vqa {:.4} orm {:.4})", r.final_reward, r.hpm, r.det, r.vqa, r.orm).unwrap();
    }
    println!("prompt: {}", prompt.text);
    print!("{shown}");
    if let Some(out) = &args.out {
        let out: PathBuf = resolve_output(out);
        if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        write_atomic(&out, dump.as_bytes())?;
    }
    Ok(())
}

pub fn inspect(args: &InspectArgs) -> Result<(), CliError> {
    let params = load_checkpoint(&args.ckpt).map_err(|e| CliError::Checkpoint { path: args.ckpt.clone(), reason: e.to_string() })?;
    let c = params.config();
    let l = params.layout();
    println!("format version {FORMAT_VERSION}");
    println!("model d_model {} d_hidden {} max_prefix {} image_len {}", c.d_model, c.d_hidden, c.max_prefix, c.image_len);
    println!("vocab {} (text {:?}, image {:?})", l.total, l.text, l.image);
    println!("parameters {} norm {:.6} finite {}", params.len(), params.norm(), params.is_finite());
    for name in TENSOR_NAMES {
        let t = params.tensor(name).expect("named tensor exists");
        let norm = t.iter().map(|x| x * x).sum::<f64>().sqrt();
        println!("  {name:<8} {:>7} norm {norm:.6}", t.len());
    }
    Ok(())
}
