use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bicot::cli::RunManifest;
use bicot::reward::{score, RewardConfig};
use bicot::rollout::{Prompt, RolloutRecord};
use bicot::{GridImage, World};

fn bicot(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bicot")).current_dir(dir).env_remove("BICOT_OUTPUT_ROOT").args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn tiny_config(dir: &Path, name: &str, out: &str, steps: u64) {
    let text = format!(
        "output_dir = \"{out}\"\ncheckpoint_every = 2\neval_images = 2\n[trainer]\nsteps = {steps}\nbatch_prompts = 1\ngroup_size = 3\nseed = 9\n[generation]\nmax_cot_len = 3\n"
    );
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn missing_or_invalid_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&bicot(tmp.path(), &["train", "--config", "absent.toml"])), 2);
    fs::write(tmp.path().join("bad.toml"), "[trainer]\nlearning_rate = 1.0\n").unwrap();
    assert_eq!(code(&bicot(tmp.path(), &["train", "--config", "bad.toml"])), 2);
    assert_eq!(code(&bicot(tmp.path(), &["frobnicate"])), 2);
}

#[test]
fn zero_steps_writes_manifest_and_initial_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    tiny_config(tmp.path(), "run.toml", "zero", 0);
    let o = bicot(tmp.path(), &["train", "--config", "run.toml"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = tmp.path().join("zero");
    let manifest: RunManifest = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.checkpoints, vec!["checkpoints/step_000000.bcot".to_string()]);
    assert_eq!(manifest.step, 0);
    assert_eq!(fs::read_dir(out.join("checkpoints")).unwrap().count(), 1);
    assert_eq!(fs::read_to_string(out.join("metrics.jsonl")).unwrap(), "");
    assert!(!out.join("eval.json").exists());
}

#[test]
fn interrupted_run_resumes_to_identical_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    tiny_config(tmp.path(), "a.toml", "whole", 5);
    tiny_config(tmp.path(), "b.toml", "split", 5);
    assert_eq!(code(&bicot(tmp.path(), &["train", "--config", "a.toml"])), 0);
    assert_eq!(code(&bicot(tmp.path(), &["train", "--config", "b.toml", "--stop-after", "2"])), 0);
    let partial: RunManifest = serde_json::from_str(&fs::read_to_string(tmp.path().join("split/manifest.json")).unwrap()).unwrap();
    assert_eq!(partial.step, 2);
    // a torn line left by a crash is discarded on resume
    let metrics = tmp.path().join("split/metrics.jsonl");
    let mut torn = fs::read_to_string(&metrics).unwrap();
    torn.push_str("{\"step\":2,\"mean_rew");
    fs::write(&metrics, torn).unwrap();
    assert_eq!(code(&bicot(tmp.path(), &["train", "--config", "b.toml"])), 0);

    for f in ["metrics.jsonl", "metrics.csv", "eval.json", "checkpoints/step_000005.bcot"] {
        assert_eq!(fs::read(tmp.path().join("whole").join(f)).unwrap(), fs::read(tmp.path().join("split").join(f)).unwrap(), "{f}");
    }
    let lines: Vec<String> = fs::read_to_string(&metrics).unwrap().lines().map(String::from).collect();
    let steps: Vec<u64> = lines.iter().map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["step"].as_u64().unwrap()).collect();
    assert_eq!(steps, vec![0, 1, 2, 3, 4]);

    // changing the config under an existing run is refused
    fs::write(tmp.path().join("b.toml"), fs::read_to_string(tmp.path().join("b.toml")).unwrap().replace("seed = 9", "seed = 10")).unwrap();
    assert_eq!(code(&bicot(tmp.path(), &["train", "--config", "b.toml"])), 2);
}

#[test]
fn eval_is_reproducible_and_rejects_corrupt_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    tiny_config(tmp.path(), "run.toml", "run", 0);
    assert_eq!(code(&bicot(tmp.path(), &["train", "--config", "run.toml"])), 0);
    let ckpt = "run/checkpoints/step_000000.bcot";
    let suite = "prompt color a red square\nprompt spatial a red square left of a blue circle\nprompt counting two green triangles\n";
    fs::write(tmp.path().join("small.suite"), suite).unwrap();
    for out in ["e1", "e2"] {
        let o = bicot(tmp.path(), &["eval", "--ckpt", ckpt, "--suite", "small.suite", "--n", "3", "--out", out]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(tmp.path().join("e1/eval.json")).unwrap(), fs::read(tmp.path().join("e2/eval.json")).unwrap());

    assert_eq!(code(&bicot(tmp.path(), &["eval", "--ckpt", ckpt, "--suite", "small.suite", "--n", "1", "--out", "one"])), 0);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("one/eval.json")).unwrap()).unwrap();
    for p in report["diversity"]["per_prompt"].as_array().unwrap() {
        assert_eq!(p["vendi"].as_f64().unwrap(), 1.0);
    }

    let mut bytes = fs::read(tmp.path().join(ckpt)).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    fs::write(tmp.path().join("flipped.bcot"), &bytes).unwrap();
    assert_eq!(code(&bicot(tmp.path(), &["eval", "--ckpt", "flipped.bcot", "--n", "1"])), 2);
    bytes[0] = b'X';
    fs::write(tmp.path().join("magic.bcot"), &bytes).unwrap();
    assert_eq!(code(&bicot(tmp.path(), &["inspect", "--ckpt", "magic.bcot"])), 2);
    assert_eq!(code(&bicot(tmp.path(), &["eval", "--ckpt", ckpt, "--suite", "missing.suite"])), 2);
}

#[test]
fn rollout_dump_round_trips_and_rescoring_agrees() {
    let tmp = tempfile::tempdir().unwrap();
    tiny_config(tmp.path(), "run.toml", "run", 0);
    assert_eq!(code(&bicot(tmp.path(), &["train", "--config", "run.toml"])), 0);
    let ckpt = "run/checkpoints/step_000000.bcot";
    let prompt = "a red square left of a blue circle";

    let greedy = |out: &str| bicot(tmp.path(), &["rollout", "--ckpt", ckpt, "--prompt", prompt, "--g", "1", "--greedy", "--seed", "3", "--out", out]);
    let (a, b) = (greedy("g1.jsonl"), greedy("g2.jsonl"));
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(fs::read(tmp.path().join("g1.jsonl")).unwrap(), fs::read(tmp.path().join("g2.jsonl")).unwrap());

    assert_eq!(code(&bicot(tmp.path(), &["rollout", "--ckpt", ckpt, "--prompt", prompt, "--g", "4", "--out", "dump.jsonl"])), 0);
    let world = World::default_world();
    let parsed = Prompt::parse(&world, prompt).unwrap();
    let dump = fs::read_to_string(tmp.path().join("dump.jsonl")).unwrap();
    assert_eq!(dump.lines().count(), 4);
    for line in dump.lines() {
        let rec = RolloutRecord::from_json_line(line).unwrap();
        assert_eq!(rec.to_json_line(), line);
        let grid = GridImage::from_text(&rec.grid, &world.vocab).unwrap();
        assert_eq!(score(&grid, &parsed.queries, &RewardConfig::default()).unwrap(), rec.rewards);
    }

    let bad = bicot(tmp.path(), &["rollout", "--ckpt", ckpt, "--prompt", "a red blob", "--g", "1"]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn ablate_reports_one_row_per_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg =
        "output_dir = \"abl\"\neval_images = 2\nsuite = \"s.suite\"\n[trainer]\nsteps = 2\nbatch_prompts = 1\ngroup_size = 2\n[generation]\nmax_cot_len = 2\n";
    fs::write(tmp.path().join("abl.toml"), cfg).unwrap();
    fs::write(tmp.path().join("s.suite"), "prompt color a red square\nprompt shape a red square and a red circle\n").unwrap();

    let o = bicot(tmp.path(), &["ablate", "--config", "abl.toml", "--modes", "both", "--seeds", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("abl/ablation/report.json")).unwrap()).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 1);

    assert_eq!(code(&bicot(tmp.path(), &["ablate", "--config", "abl.toml", "--modes", "none,both", "--seeds", "1,1"])), 2);
    assert_eq!(code(&bicot(tmp.path(), &["ablate", "--config", "abl.toml", "--modes", "both,sideways", "--seeds", "1"])), 2);

    let o = bicot(tmp.path(), &["ablate", "--config", "abl.toml", "--modes", "none,token_only,both", "--seeds", "1,2"]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(tmp.path().join("abl/ablation/ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2);
    let summary = String::from_utf8_lossy(&o.stdout);
    assert!(summary.contains("median score both >= none"));

    let o = bicot(tmp.path(), &["ablate", "--config", "abl.toml", "--seeds", "1", "--masks", "H,HD"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(tmp.path().join("abl/reward_masks/masks.csv")).unwrap().lines().count(), 3);
    assert_eq!(code(&bicot(tmp.path(), &["ablate", "--config", "abl.toml", "--seeds", "1", "--masks", "HX"])), 2);
}

#[test]
fn output_root_variable_relocates_relative_dirs() {
    let tmp = tempfile::tempdir().unwrap();
    tiny_config(tmp.path(), "run.toml", "rel", 0);
    let root = tmp.path().join("elsewhere");
    let o = Command::new(env!("CARGO_BIN_EXE_bicot"))
        .current_dir(tmp.path())
        .env("BICOT_OUTPUT_ROOT", &root)
        .args(["train", "--config", "run.toml"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(root.join("rel/manifest.json").exists());
    assert!(!tmp.path().join("rel").exists());
}
