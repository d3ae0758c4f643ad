//! Acceptance suite. Each test is one pass/fail criterion; they run one at a
//! time so the timed ones measure a quiet machine.

mod common;

use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use bicot::domain::{CellCode, Direction, ObjectSpec};
use bicot::eval::{run_ablation, run_mask_sweep, training_pool, vendi_score, AblationSpec, BenchmarkSuite};
use bicot::grpo::{
    compute_advantages, grpo_objective, importance_ratio, k3, position_term, run_training, AblationMode, ObjectiveConfig, Preset, TrainerConfig, TrainerState,
};
use bicot::policy::PolicyParams;
use bicot::reward::{detect, reward_det, reward_orm, reward_vqa, spatial_score, ExpertMask, RewardConfig};
use bicot::rollout::{trace_under, GenConfig};
use bicot::{GridImage, World};
use common::{perturbed, prompt, random_groups, small_gen, small_model};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn unit_direction(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

fn shifted(p: &PolicyParams, v: &[f64], h: f64) -> PolicyParams {
    let mut q = p.clone();
    q.as_mut_slice().iter_mut().zip(v).for_each(|(x, d)| *x += h * d);
    q
}

#[test]
fn gradient_matches_finite_differences() {
    let _g = serial();
    let start = Instant::now();
    let world = World::default_world();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (h, margin, tol) = (1e-4, 2e-3, 1e-4);
    let mut checked = 0;
    let mut clipped_instances = 0;
    let mut worst: f64 = 0.0;
    while checked < 100 {
        let guided = rng.gen_bool(0.5);
        let gen = GenConfig { cfg_scale: if guided { 3.0 } else { 1.0 }, cfg_in_ratio: guided, ..small_gen() };
        let mode = AblationMode::ALL[rng.gen_range(0..4)];
        let gen = GenConfig { use_cot: mode.uses_cot() || rng.gen_bool(0.3), ..gen };
        let cfg = ObjectiveConfig { clip_eps: 0.2, beta: [0.0, 0.01, 0.5][rng.gen_range(0..3)], mode };
        let reference = PolicyParams::init(small_model(), &world.vocab, rng.gen());
        let old = perturbed(&reference, 0.2, &mut rng);
        let groups = random_groups(&old, &reference, &world, &gen, rng.gen_range(1..3), rng.gen_range(2..5), &mut rng);
        let params = perturbed(&old, 0.3, &mut rng);

        let mut near_kink = false;
        let mut any_clipped = false;
        for sg in &groups {
            for resp in &sg.group.responses {
                let new = trace_under(&params, &world.instruction, &sg.group.prompt.tokens, &resp.semantic.tokens, &resp.image.tokens, &gen).unwrap();
                for j in 0..new.len() {
                    let r = importance_ratio(&new, &resp.old, j, resp.semantic.tokens.len()).unwrap();
                    near_kink |= (r - 1.2).abs() < margin || (r - 0.8).abs() < margin;
                    any_clipped |= !(0.8..=1.2).contains(&r);
                }
            }
        }
        if near_kink {
            continue;
        }
        let out = grpo_objective(&groups, &params, &world.instruction, &gen, &cfg, true).unwrap();
        let grad = out.grad.unwrap();
        let v = unit_direction(params.len(), &mut rng);
        let analytic: f64 = grad.as_slice().iter().zip(&v).map(|(g, d)| g * d).sum();
        let f = |p: &PolicyParams| grpo_objective(&groups, p, &world.instruction, &gen, &cfg, false).unwrap().objective;
        let fd = (f(&shifted(&params, &v, h)) - f(&shifted(&params, &v, -h))) / (2.0 * h);
        let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-8);
        worst = worst.max(rel);
        assert!(rel <= tol, "instance {checked}: analytic {analytic} vs fd {fd} (rel {rel}, mode {mode}, guided {guided})");
        clipped_instances += any_clipped as usize;
        checked += 1;
    }
    let elapsed = start.elapsed();
    println!("100 instances, worst relative error {worst:.2e}, {clipped_instances} with clipped positions, {elapsed:?}");
    assert!(clipped_instances >= 10);
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
}

#[test]
fn advantages_are_standardized_and_invariant() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..2000 {
        let g = rng.gen_range(2..17);
        let rewards: Vec<f64> = (0..g).map(|_| rng.gen_range(0.0..1.0)).collect();
        let a = compute_advantages(&rewards, 1e-8).unwrap().advantages;
        let mean = a.iter().sum::<f64>() / g as f64;
        let std = (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / g as f64).sqrt();
        assert!(mean.abs() <= 1e-9);
        assert!((std - 1.0).abs() <= 1e-6);

        let (scale, shift) = (rng.gen_range(0.1..10.0), rng.gen_range(-5.0..5.0));
        let moved: Vec<f64> = rewards.iter().map(|r| scale * r + shift).collect();
        let b = compute_advantages(&moved, 1e-8).unwrap().advantages;
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-9);
        }

        let flat = vec![rng.gen_range(0.0..1.0); g];
        assert!(compute_advantages(&flat, 1e-8).unwrap().advantages.iter().all(|x| *x == 0.0));
    }
}

#[test]
fn ratios_start_at_one_and_see_the_right_context() {
    let _g = serial();
    let world = World::default_world();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for guided in [false, true] {
        let gen = GenConfig { cfg_scale: if guided { 2.5 } else { 1.0 }, cfg_in_ratio: guided, ..small_gen() };
        let reference = PolicyParams::init(small_model(), &world.vocab, 3);
        let old = perturbed(&reference, 0.5, &mut rng);
        let groups = random_groups(&old, &reference, &world, &gen, 4, 4, &mut rng);
        for sg in &groups {
            let p = &sg.group.prompt.tokens;
            for resp in &sg.group.responses {
                let (s, t) = (&resp.semantic.tokens, &resp.image.tokens);
                let same = trace_under(&old, &world.instruction, p, s, t, &gen).unwrap();
                for j in 0..same.len() {
                    assert!((importance_ratio(&same, &resp.old, j, s.len()).unwrap() - 1.0).abs() <= 1e-12);
                }
                if s.is_empty() {
                    continue;
                }
                let mut t2 = t.clone();
                t2.iter_mut().for_each(|x| *x = world.vocab.image_range().start + (*x + 7 - world.vocab.image_range().start) % 25);
                let other_image = trace_under(&old, &world.instruction, p, s, &t2, &gen).unwrap();
                assert_eq!(&other_image.logp[..s.len()], &same.logp[..s.len()]);

                for k in [0, s.len() - 1] {
                    let mut s2 = s.clone();
                    s2[k] = if s2[k] == world.vocab.text_range().start { s2[k] + 1 } else { world.vocab.text_range().start };
                    let other_plan = trace_under(&old, &world.instruction, p, &s2, t, &gen).unwrap();
                    let image_changed = (0..t.len()).filter(|&j| other_plan.logp[s.len() + j] != same.logp[s.len() + j]).count();
                    assert_eq!(image_changed, t.len(), "plan token {k} must reach every image position");
                }
            }
        }
    }
}

#[test]
fn clipping_zeroes_gradient_and_kl_penalty_holds_policy() {
    let _g = serial();
    let cfg = ObjectiveConfig { clip_eps: 0.2, beta: 0.0, mode: AblationMode::Both };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10_000 {
        let a = rng.gen_range(1e-3..3.0);
        let lp_old = rng.gen_range(-5.0..0.0);
        let lp_new = lp_old + rng.gen_range(0.19..3.0);
        let t = position_term(lp_new, lp_old, rng.gen_range(-5.0..0.0), a, &cfg, 1.0);
        assert!(t.clipped);
        assert_eq!(t.weight, 0.0);
        assert_eq!(t.value, 1.2 * a);
    }
    for d in (-400..=400).map(|i| i as f64 * 0.125).chain((0..10_000).map(|_| rng.gen_range(-30.0..30.0))) {
        assert!(k3(d) >= 0.0, "k3({d})");
    }

    // every position of every positive-advantage response clipped: no gradient at all
    let world = World::default_world();
    let gen = small_gen();
    let reference = PolicyParams::init(small_model(), &world.vocab, 8);
    let mut groups = random_groups(&reference, &reference, &world, &gen, 3, 4, &mut rng);
    for sg in &mut groups {
        for (resp, a) in sg.group.responses.iter_mut().zip(sg.advantages.advantages.iter_mut()) {
            *a = a.max(0.0);
            resp.old.logp.iter_mut().for_each(|x| *x -= 1.0);
        }
    }
    let out = grpo_objective(&groups, &reference, &world.instruction, &gen, &cfg, true).unwrap();
    assert!(out.clip_fraction > 0.0);
    assert_eq!(out.grad.unwrap().norm(), 0.0);

    let preset = Preset::desk();
    let pool = training_pool(&world, &BenchmarkSuite::default_suite(&world));
    let kl = |beta: f64| {
        let trainer = TrainerConfig { beta, steps: 50, seed: 4, ..preset.trainer };
        let mut state = TrainerState::new(PolicyParams::init(preset.model, &world.vocab, 4), trainer, preset.generation, preset.reward).unwrap();
        let mut total = 0.0;
        run_training(&mut state, &world, &pool, |r, _| {
            total += r.mean_kl;
            Ok(())
        })
        .unwrap();
        total / 50.0
    };
    let (high, zero) = (kl(1e3), kl(0.0));
    println!("mean KL over 50 steps: beta 1e3 {high:.3e}, beta 0 {zero:.3e}");
    assert!(high * 10.0 <= zero, "beta 1e3 {high} vs beta 0 {zero}");
}

/// Flood-fill, box and centroid tables for every 4x4 bitmask, bit `4r + c`.
struct MaskTables {
    components: Vec<u8>,
    bbox: Vec<(usize, usize, usize, usize)>,
    centroid: Vec<(f64, f64)>,
}

impl MaskTables {
    fn build() -> Self {
        let mut t = MaskTables { components: vec![0; 1 << 16], bbox: vec![(0, 0, 0, 0); 1 << 16], centroid: vec![(0.0, 0.0); 1 << 16] };
        for m in 1..(1usize << 16) {
            let cells: Vec<(usize, usize)> = (0..16).filter(|i| m >> i & 1 == 1).map(|i| (i / 4, i % 4)).collect();
            let mut label = [usize::MAX; 16];
            let mut comps = 0;
            for &(r, c) in &cells {
                if label[r * 4 + c] != usize::MAX {
                    continue;
                }
                let mut stack = vec![(r, c)];
                label[r * 4 + c] = comps;
                while let Some((r, c)) = stack.pop() {
                    for (dr, dc) in [(0i32, 1i32), (1, 0), (0, -1), (-1, 0)] {
                        let (nr, nc) = (r as i32 + dr, c as i32 + dc);
                        if (0..4).contains(&nr) && (0..4).contains(&nc) {
                            let i = (nr * 4 + nc) as usize;
                            if m >> i & 1 == 1 && label[i] == usize::MAX {
                                label[i] = comps;
                                stack.push((nr as usize, nc as usize));
                            }
                        }
                    }
                }
                comps += 1;
            }
            t.components[m] = comps as u8;
            let rows = cells.iter().map(|p| p.0);
            let cols = cells.iter().map(|p| p.1);
            t.bbox[m] = (rows.clone().min().unwrap(), rows.clone().max().unwrap(), cols.clone().min().unwrap(), cols.clone().max().unwrap());
            let n = cells.len() as f64;
            t.centroid[m] = (rows.sum::<usize>() as f64 / n, cols.sum::<usize>() as f64 / n);
        }
        t
    }

    fn spatial(&self, a: usize, b: usize, dir: Direction, tau: f64) -> f64 {
        if a == 0 || b == 0 {
            return 0.0;
        }
        let (ca, cb) = (self.centroid[a], self.centroid[b]);
        let d = match dir {
            Direction::LeftOf => cb.1 - ca.1,
            Direction::RightOf => ca.1 - cb.1,
            Direction::Above => cb.0 - ca.0,
            Direction::Below => ca.0 - cb.0,
        };
        if d > tau {
            return 1.0;
        }
        if d < 0.0 {
            return 0.0;
        }
        let (ba, bb) = (self.bbox[a], self.bbox[b]);
        let area = |x: (usize, usize, usize, usize)| (x.1 - x.0 + 1) * (x.3 - x.2 + 1);
        let (r0, r1, c0, c1) = (ba.0.max(bb.0), ba.1.min(bb.1), ba.2.max(bb.2), ba.3.min(bb.3));
        let inter = if r0 > r1 || c0 > c1 { 0 } else { (r1 - r0 + 1) * (c1 - c0 + 1) };
        inter as f64 / (area(ba) + area(bb) - inter) as f64
    }
}

fn smoothed(m: f64, eps: f64) -> f64 {
    let p_yes = (m + eps) / (1.0 + 2.0 * eps);
    let p_no = (1.0 - m + eps) / (1.0 + 2.0 * eps);
    p_yes / (p_yes + p_no)
}

#[test]
fn reward_formulas_match_brute_force_on_every_4x4_grid() {
    let _g = serial();
    let world = World::default_world();
    let cfg = RewardConfig::default();
    // same shape, different colors: covers exact, shape-only and absent matches
    let left = prompt(&world, "a red square left of a blue square").queries;
    let count = prompt(&world, "two red squares and one blue square").queries;
    let plain = prompt(&world, "a red square and a blue square").queries;
    let (a, b) = (left.existence[0], left.existence[1]);
    assert_eq!(a.shape, b.shape);
    assert_ne!(a.color, b.color);
    let t = MaskTables::build();
    let alpha = 0.6;

    let mut mismatches = 0usize;
    let mut first = None;
    let mut branch_hits = [0usize; 3];
    let total = 3usize.pow(16);
    for k in 0..total {
        let (mut ma, mut mb, mut x) = (0usize, 0usize, k);
        let mut grid = GridImage::empty(4, 4);
        for i in 0..16 {
            match x % 3 {
                1 => {
                    ma |= 1 << i;
                    grid.set(i / 4, i % 4, CellCode::Object(a));
                }
                2 => {
                    mb |= 1 << i;
                    grid.set(i / 4, i % 4, CellCode::Object(b));
                }
                _ => {}
            }
            x /= 3;
        }
        let found = ((ma != 0) as usize + (mb != 0) as usize) as f64 / 2.0;
        let strength = |own: usize, other: usize| {
            if own != 0 {
                1.0
            } else if other != 0 {
                0.5
            } else {
                0.0
            }
        };
        let (sa, sb) = (strength(ma, mb), strength(mb, ma));
        let sp_left = t.spatial(ma, mb, Direction::LeftOf, 1.5);
        let constraints = [sa > 0.0, sa == 1.0, sb > 0.0, sb == 1.0, sp_left == 1.0];
        let f = constraints.iter().filter(|c| **c).count() as f64 / constraints.len() as f64;

        let (da, db) = (detect(&grid, a), detect(&grid, b));
        let mut pairs = vec![
            (reward_det(&grid, &left, &cfg), alpha * sp_left + (1.0 - alpha) * found),
            (reward_vqa(&grid, &left, &cfg), (smoothed(sa, 0.01) + smoothed(sb, 0.01)) / 2.0),
            (reward_orm(&grid, &left, &cfg), smoothed(f, 0.01)),
            (reward_det(&grid, &count, &cfg), ((t.components[ma] == 2) as usize + (t.components[mb] == 1) as usize) as f64 / 2.0),
            (reward_det(&grid, &plain, &cfg), found),
        ];
        for dir in Direction::ALL {
            pairs.push((spatial_score(&da, &db, dir, 1.5), t.spatial(ma, mb, dir, 1.5)));
        }
        if ma != 0 && mb != 0 {
            branch_hits[match sp_left {
                1.0 => 0,
                0.0 => 1,
                _ => 2,
            }] += 1;
        }
        for (i, (got, want)) in pairs.iter().enumerate() {
            if got.to_bits() != want.to_bits() {
                mismatches += 1;
                first.get_or_insert((k, i, *got, *want));
            }
        }
    }
    println!("{total} grids, spatial branches (threshold, wrong side, overlap) {branch_hits:?}");
    assert!(branch_hits.iter().all(|&n| n > 0));
    assert_eq!(mismatches, 0, "first mismatch (grid, quantity, got, want): {first:?}");
}

#[test]
fn vendi_reference_cases() {
    let _g = serial();
    let world = World::default_world();
    let codes: Vec<CellCode> = std::iter::once(CellCode::Background)
        .chain((0..world.vocab.n_shapes()).flat_map(|s| (0..world.vocab.n_colors()).map(move |c| CellCode::Object(ObjectSpec::new(s, c)))))
        .collect();
    let filled = |code: CellCode| GridImage::from_cells(4, 4, vec![code; 16]).unwrap();

    let same = vec![filled(codes[3]); 6];
    assert!((vendi_score(&same).unwrap() - 1.0).abs() <= 1e-9);
    for n in 1..=16 {
        let orthogonal: Vec<GridImage> = codes[..n].iter().map(|&c| filled(c)).collect();
        assert!((vendi_score(&orthogonal).unwrap() - n as f64).abs() <= 1e-9, "n = {n}");
    }
    let pairs = vec![filled(codes[1]), filled(codes[1]), filled(codes[2]), filled(codes[2])];
    assert!((vendi_score(&pairs).unwrap() - 2.0).abs() <= 1e-9);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let mut set: Vec<GridImage> =
            (0..rng.gen_range(2..12)).map(|_| GridImage::from_cells(4, 4, (0..16).map(|_| codes[rng.gen_range(0..4)]).collect()).unwrap()).collect();
        let v = vendi_score(&set).unwrap();
        set.shuffle(&mut rng);
        assert!((vendi_score(&set).unwrap() - v).abs() <= 1e-9);
    }
}

#[test]
fn desk_training_raises_reward() {
    let _g = serial();
    let start = Instant::now();
    let world = World::default_world();
    let pool = training_pool(&world, &BenchmarkSuite::default_suite(&world));
    let preset = Preset::desk();
    assert!(world.vocab.total_size() <= 200);
    assert_eq!((preset.generation.height, preset.generation.width, preset.trainer.group_size), (8, 8, 8));
    let mut gains = Vec::new();
    for seed in 0..5u64 {
        let trainer = TrainerConfig { seed, steps: 500, ..preset.trainer };
        let mut state = TrainerState::new(PolicyParams::init(preset.model, &world.vocab, seed), trainer, preset.generation, preset.reward).unwrap();
        let mut rewards = Vec::new();
        run_training(&mut state, &world, &pool, |r, _| {
            rewards.push(r.mean_reward);
            Ok(())
        })
        .unwrap();
        let first = rewards[..20].iter().sum::<f64>() / 20.0;
        let last = rewards[rewards.len() - 20..].iter().sum::<f64>() / 20.0;
        println!("seed {seed}: first 20 {first:.4}, last 20 {last:.4}, gain {:+.4}", last - first);
        gains.push(last - first);
    }
    let elapsed = start.elapsed();
    let passing = gains.iter().filter(|g| **g >= 0.15).count();
    println!("{passing}/5 seeds gained at least 0.15 in {elapsed:?}");
    assert!(elapsed <= Duration::from_secs(600), "took {elapsed:?}");
    assert!(passing >= 4, "only {passing}/5 seeds gained at least 0.15: {gains:?}");
}

#[test]
fn ablation_orderings() {
    let _g = serial();
    let world = World::default_world();
    let suite = BenchmarkSuite::default_suite(&world);
    let pool = training_pool(&world, &suite);
    let preset = Preset::desk();
    let spec = AblationSpec { preset, modes: AblationMode::ALL.to_vec(), seeds: (0..5).collect(), steps: preset.trainer.steps, n_images: 4, eval_seed: 99 };
    let base = PolicyParams::init(preset.model, &world.vocab, 0);
    let report = run_ablation(&base, &world, &pool, &suite, &spec).unwrap();
    let table = report.summary_table();
    println!("{table}");
    assert_eq!(report.rows.len(), 20);
    assert_eq!(report.checks.len(), 6);
    assert_eq!(table.matches("[ok]").count() + table.matches("[FAILED]").count(), 6);
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.holds).map(|c| c.claim.as_str()).collect();
    assert!(failed.is_empty(), "orderings not reproduced: {failed:?}");
}

#[test]
fn reward_mask_combinations_complete() {
    let _g = serial();
    let world = World::default_world();
    let suite = BenchmarkSuite::select(&world, 2);
    let pool = training_pool(&world, &suite);
    let preset = Preset::desk();
    let spec = AblationSpec { preset, modes: vec![AblationMode::Both], seeds: vec![0], steps: 20, n_images: 2, eval_seed: 1 };
    let flags = ["H", "D", "V", "O", "HD", "HDV", "HDVO"];
    let masks: Vec<ExpertMask> = flags.iter().map(|f| ExpertMask::from_flags(f).unwrap()).collect();
    let report = run_mask_sweep(&PolicyParams::init(preset.model, &world.vocab, 0), &world, &pool, &suite, &spec, &masks).unwrap();
    println!("{}", report.summary_table());
    assert_eq!(report.rows.iter().map(|r| r.mask.as_str()).collect::<Vec<_>>(), flags);
    for r in &report.rows {
        for v in [r.overall, r.hpm, r.det, r.vqa, r.orm, r.train_reward_first, r.train_reward_last] {
            assert!((0.0..=1.0).contains(&v), "{r:?}");
        }
        assert!(r.vendi >= 1.0 - 1e-9);
    }
    assert_eq!(report.to_csv().lines().count(), 1 + flags.len());
}

fn bicot(dir: &Path, args: &[&str]) {
    let o = Command::new(env!("CARGO_BIN_EXE_bicot")).current_dir(dir).env_remove("BICOT_OUTPUT_ROOT").args(args).output().unwrap();
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn commands_rerun_byte_identically() {
    let _g = serial();
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("run.toml"), "output_dir = \"first\"\ncheckpoint_every = 5\neval_images = 3\n[trainer]\nsteps = 12\nseed = 21\n").unwrap();
    bicot(dir, &["train", "--config", "run.toml"]);

    // rebuild the config from the manifest alone and run again elsewhere
    let manifest: bicot::cli::RunManifest = serde_json::from_str(&fs::read_to_string(dir.join("first/manifest.json")).unwrap()).unwrap();
    let mut replay = manifest.config.clone();
    replay.output_dir = "second".into();
    fs::write(dir.join("replay.toml"), replay.to_toml()).unwrap();
    bicot(dir, &["train", "--config", "replay.toml"]);
    for f in ["metrics.jsonl", "metrics.csv", "eval.json", "checkpoints/step_000012.bcot"] {
        assert_eq!(fs::read(dir.join("first").join(f)).unwrap(), fs::read(dir.join("second").join(f)).unwrap(), "{f}");
    }

    let ckpt = "first/checkpoints/step_000012.bcot";
    for out in ["e1", "e2"] {
        bicot(dir, &["eval", "--ckpt", ckpt, "--n", "3", "--out", out]);
    }
    assert_eq!(fs::read(dir.join("e1/eval.json")).unwrap(), fs::read(dir.join("e2/eval.json")).unwrap());
    for out in ["r1.jsonl", "r2.jsonl"] {
        bicot(dir, &["rollout", "--ckpt", ckpt, "--prompt", "a red square above a blue circle", "--g", "4", "--seed", "5", "--out", out]);
    }
    assert_eq!(fs::read(dir.join("r1.jsonl")).unwrap(), fs::read(dir.join("r2.jsonl")).unwrap());
}
