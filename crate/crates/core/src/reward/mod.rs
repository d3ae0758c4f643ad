//! Ensemble of deterministic vision-expert oracles over decoded grids.
//!
//! * `hpm` - preference proxy rewarding compact objects on a clean canvas
//! * `det` - detector reward with existence, spatial and count branches
//! * `vqa` - per-object yes/no probabilities from attribute matching
//! * `orm` - one yes/no judgement of the whole prompt
//!
//! The final reward is the mean over enabled experts.

mod detect;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{CellCode, Direction, DomainError, GridImage, KnowledgeTable, ObjectSpec, SceneSpec};

pub use detect::{detect, displacement, spatial_score, BoundingBox, Detection};

#[derive(Debug, Error)]
pub enum RewardError {
    #[error("no reward expert is enabled")]
    NoExpertEnabled,
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertMask {
    pub hpm: bool,
    pub det: bool,
    pub vqa: bool,
    pub orm: bool,
}

impl Default for ExpertMask {
    fn default() -> Self {
        Self { hpm: true, det: true, vqa: true, orm: true }
    }
}

impl ExpertMask {
    /// Parses flags such as `"hd"` or `"hdvo"`.
    pub fn from_flags(flags: &str) -> Option<Self> {
        let mut m = Self { hpm: false, det: false, vqa: false, orm: false };
        for ch in flags.chars() {
            match ch.to_ascii_lowercase() {
                'h' => m.hpm = true,
                'd' => m.det = true,
                'v' => m.vqa = true,
                'o' => m.orm = true,
                _ => return None,
            }
        }
        m.any().then_some(m)
    }

    pub fn flags(&self) -> String {
        [(self.hpm, 'H'), (self.det, 'D'), (self.vqa, 'V'), (self.orm, 'O')].iter().filter(|(on, _)| *on).map(|(_, c)| *c).collect()
    }

    pub fn any(&self) -> bool {
        self.hpm || self.det || self.vqa || self.orm
    }

    fn as_array(&self) -> [bool; 4] {
        [self.hpm, self.det, self.vqa, self.orm]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    /// Weight of the spatial term in the detector reward.
    pub alpha: f64,
    /// Minimum centroid displacement (cells) for a confident spatial relation.
    pub spatial_tau: f64,
    /// Smoothing that keeps yes/no probabilities strictly inside (0, 1).
    pub epsilon: f64,
    /// Non-background cells the preference proxy tolerates before counting clutter.
    pub clutter_budget: usize,
    pub mask: ExpertMask,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { alpha: 0.6, spatial_tau: 1.5, epsilon: 0.01, clutter_budget: 16, mask: ExpertMask::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialQuery {
    pub subject: ObjectSpec,
    pub object: ObjectSpec,
    pub direction: Direction,
}

/// Everything the experts ask about one prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardQueries {
    /// One entry per object, knowledge objects resolved, in prompt order.
    pub existence: Vec<ObjectSpec>,
    pub spatial: Option<SpatialQuery>,
    pub counts: Option<Vec<(ObjectSpec, u32)>>,
    pub knowledge: Option<ObjectSpec>,
}

pub fn extract_queries(spec: &SceneSpec, table: &KnowledgeTable) -> Result<RewardQueries, RewardError> {
    spec.validate()?;
    let knowledge = spec.knowledge_key.as_deref().map(|k| table.lookup(k)).transpose()?;
    let mut existence: Vec<ObjectSpec> = knowledge.into_iter().collect();
    existence.extend(spec.objects.iter().copied());
    let spatial = spec.relation.map(|r| SpatialQuery { subject: spec.objects[r.subject], object: spec.objects[r.object], direction: r.direction });
    let counts = spec.counts.as_ref().map(|c| spec.objects.iter().copied().zip(c.iter().copied()).collect());
    Ok(RewardQueries { existence, spatial, counts, knowledge })
}

pub fn reward_det(grid: &GridImage, q: &RewardQueries, cfg: &RewardConfig) -> f64 {
    let k = q.existence.len() as f64;
    if let Some(counts) = &q.counts {
        let hits = counts.iter().filter(|(o, n)| detect(grid, *o).count == *n as usize).count();
        return hits as f64 / counts.len() as f64;
    }
    let detections: Vec<Detection> = q.existence.iter().map(|o| detect(grid, *o)).collect();
    let detected = detections.iter().filter(|d| d.found).count() as f64 / k;
    let find = |o: ObjectSpec| detections.iter().find(|d| d.query == o).cloned().unwrap_or_else(|| detect(grid, o));
    match &q.spatial {
        Some(s) => {
            let r_spatial = spatial_score(&find(s.subject), &find(s.object), s.direction, cfg.spatial_tau);
            cfg.alpha * r_spatial + (1.0 - cfg.alpha) * detected
        }
        None => detected,
    }
}

/// `P_yes / (P_yes + P_no)` for a smoothed match strength `m`.
pub fn yes_ratio(m: f64, epsilon: f64) -> f64 {
    let p_yes = (m + epsilon) / (1.0 + 2.0 * epsilon);
    let p_no = (1.0 - m + epsilon) / (1.0 + 2.0 * epsilon);
    p_yes / (p_yes + p_no)
}

/// 1 for an exact match, 0.5 when only the shape appears, 0 otherwise.
pub fn match_strength(grid: &GridImage, o: ObjectSpec) -> f64 {
    let mut shape_seen = false;
    for cell in grid.cells() {
        if let CellCode::Object(c) = cell {
            if *c == o {
                return 1.0;
            }
            shape_seen |= c.shape == o.shape;
        }
    }
    if shape_seen {
        0.5
    } else {
        0.0
    }
}

pub fn reward_vqa(grid: &GridImage, q: &RewardQueries, cfg: &RewardConfig) -> f64 {
    let total: f64 = q.existence.iter().map(|&o| yes_ratio(match_strength(grid, o), cfg.epsilon)).sum();
    total / q.existence.len() as f64
}

/// Fraction of prompt constraints a grid satisfies: shape presence and exact
/// attribute match per object, each requested count, and a confident
/// spatial relation.
pub fn constraint_fraction(grid: &GridImage, q: &RewardQueries, cfg: &RewardConfig) -> f64 {
    let mut total = 0usize;
    let mut met = 0usize;
    let mut check = |ok: bool| {
        total += 1;
        met += ok as usize;
    };
    for &o in &q.existence {
        let m = match_strength(grid, o);
        check(m > 0.0);
        check(m == 1.0);
    }
    if let Some(counts) = &q.counts {
        for &(o, n) in counts {
            check(detect(grid, o).count == n as usize);
        }
    }
    if let Some(s) = &q.spatial {
        check(spatial_score(&detect(grid, s.subject), &detect(grid, s.object), s.direction, cfg.spatial_tau) == 1.0);
    }
    met as f64 / total as f64
}

pub fn reward_orm(grid: &GridImage, q: &RewardQueries, cfg: &RewardConfig) -> f64 {
    yes_ratio(constraint_fraction(grid, q, cfg), cfg.epsilon)
}

/// Most 4-adjacent pairs `n` cells can form: `2n - ceil(2 sqrt n)`.
pub fn max_adjacent_pairs(n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let mut s = (n as f64).sqrt().ceil() as usize;
    while s > 0 && (s - 1) * (s - 1) >= n {
        s -= 1;
    }
    // ceil(2 sqrt n) is 2s - 1 when n <= s(s-1), else 2s
    let ceil_two_root = if n <= s * (s - 1) { 2 * s - 1 } else { 2 * s };
    2 * n - ceil_two_root
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HpmParts {
    pub contiguity: f64,
    pub clutter: f64,
}

pub fn hpm_parts(grid: &GridImage, budget: usize) -> HpmParts {
    let (h, w) = (grid.height(), grid.width());
    let mut per_code: std::collections::BTreeMap<ObjectSpec, (usize, usize)> = Default::default();
    for r in 0..h {
        for c in 0..w {
            let CellCode::Object(o) = grid.get(r, c) else { continue };
            let e = per_code.entry(o).or_default();
            e.0 += 1;
            if r + 1 < h && grid.get(r + 1, c) == CellCode::Object(o) {
                e.1 += 1;
            }
            if c + 1 < w && grid.get(r, c + 1) == CellCode::Object(o) {
                e.1 += 1;
            }
        }
    }
    let pairs: usize = per_code.values().map(|v| v.1).sum();
    let max: usize = per_code.values().map(|v| max_adjacent_pairs(v.0)).sum();
    let contiguity = if max == 0 { 1.0 } else { pairs as f64 / max as f64 };
    let n = grid.non_background();
    let cells = h * w;
    let clutter = if n <= budget || cells <= budget { 0.0 } else { (n - budget) as f64 / (cells - budget) as f64 };
    HpmParts { contiguity, clutter }
}

pub fn reward_hpm(grid: &GridImage, cfg: &RewardConfig) -> f64 {
    let p = hpm_parts(grid, cfg.clutter_budget);
    0.5 * p.contiguity + 0.5 * (1.0 - p.clutter)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardReport {
    pub hpm: f64,
    pub det: f64,
    pub vqa: f64,
    pub orm: f64,
    pub mask: ExpertMask,
    #[serde(rename = "final")]
    pub final_reward: f64,
}

impl RewardReport {
    pub fn scores(&self) -> [f64; 4] {
        [self.hpm, self.det, self.vqa, self.orm]
    }
}

/// Mean of the enabled expert scores, ordered `[hpm, det, vqa, orm]`.
pub fn ensemble_reward(scores: [f64; 4], mask: ExpertMask) -> Result<RewardReport, RewardError> {
    let enabled = mask.as_array();
    let n = enabled.iter().filter(|e| **e).count();
    if n == 0 {
        return Err(RewardError::NoExpertEnabled);
    }
    let sum: f64 = scores.iter().zip(enabled).filter(|(_, e)| *e).map(|(s, _)| s).sum();
    Ok(RewardReport { hpm: scores[0], det: scores[1], vqa: scores[2], orm: scores[3], mask, final_reward: sum / n as f64 })
}

/// Scores one grid with every expert and averages the enabled ones.
pub fn score(grid: &GridImage, q: &RewardQueries, cfg: &RewardConfig) -> Result<RewardReport, RewardError> {
    let scores = [reward_hpm(grid, cfg), reward_det(grid, q, cfg), reward_vqa(grid, q, cfg), reward_orm(grid, q, cfg)];
    ensemble_reward(scores, cfg.mask)
}

/// Paints a canonical grid that satisfies every constraint of the prompt.
pub fn render_scene(q: &RewardQueries, height: usize, width: usize) -> GridImage {
    let mut g = GridImage::empty(height, width);
    if let Some(s) = &q.spatial {
        let (a, b) = match s.direction {
            Direction::LeftOf => ((height / 2, 0), (height / 2, width - 1)),
            Direction::RightOf => ((height / 2, width - 1), (height / 2, 0)),
            Direction::Above => ((0, width / 2), (height - 1, width / 2)),
            Direction::Below => ((height - 1, width / 2), (0, width / 2)),
        };
        g.set(a.0, a.1, CellCode::Object(s.subject));
        g.set(b.0, b.1, CellCode::Object(s.object));
        return g;
    }
    let counts: Vec<(ObjectSpec, usize)> = match &q.counts {
        Some(c) => c.iter().map(|(o, n)| (*o, *n as usize)).collect(),
        None => q.existence.iter().map(|o| (*o, 1)).collect(),
    };
    // isolated cells on a lattice with stride 2 never touch each other
    let mut slots = (0..height).step_by(2).flat_map(|r| (0..width).step_by(2).map(move |c| (r, c)));
    for (o, n) in counts {
        for _ in 0..n {
            if let Some((r, c)) = slots.next() {
                g.set(r, c, CellCode::Object(o));
            }
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Grammar, Relation};

    fn cfg() -> RewardConfig {
        RewardConfig::default()
    }

    fn q(spec: &SceneSpec) -> RewardQueries {
        extract_queries(spec, Grammar::default_world().knowledge()).unwrap()
    }

    #[test]
    fn query_extraction() {
        let world = Grammar::default_world();
        let spatial = world.parse("a red square left of a blue circle").unwrap();
        let qs = q(&spatial);
        assert_eq!(qs.existence.len(), 2);
        assert!(qs.spatial.is_some());
        let k = q(&world.parse("the K_amsterdam").unwrap());
        assert_eq!(k.existence, vec![ObjectSpec::new(3, 0)]);
        let c = q(&world.parse("two green triangles").unwrap());
        assert_eq!(c.counts, Some(vec![(ObjectSpec::new(2, 2), 2)]));
        let bad = SceneSpec { knowledge_key: Some("K_nope".into()), ..Default::default() };
        assert!(matches!(extract_queries(&bad, world.knowledge()), Err(RewardError::Domain(DomainError::UnknownKey(_)))));
    }

    #[test]
    fn det_branches() {
        let a = ObjectSpec::new(0, 0);
        let b = ObjectSpec::new(1, 1);
        let spec = SceneSpec { objects: vec![a, b], relation: Some(Relation { subject: 0, object: 1, direction: Direction::LeftOf }), ..Default::default() };
        let mut g = GridImage::empty(8, 8);
        g.set(4, 1, CellCode::Object(a));
        g.set(4, 6, CellCode::Object(b));
        assert_eq!(reward_det(&g, &q(&spec), &cfg()), 0.6 * 1.0 + 0.4 * 1.0);

        let counted = SceneSpec { objects: vec![a], counts: Some(vec![2]), ..Default::default() };
        let mut g2 = GridImage::empty(8, 8);
        g2.set(0, 0, CellCode::Object(a));
        g2.set(5, 5, CellCode::Object(a));
        assert_eq!(reward_det(&g2, &q(&counted), &cfg()), 1.0);
        g2.set(7, 0, CellCode::Object(a));
        assert_eq!(reward_det(&g2, &q(&counted), &cfg()), 0.0);

        let plain = SceneSpec { objects: vec![a, b], ..Default::default() };
        let mut g3 = GridImage::empty(8, 8);
        g3.set(0, 0, CellCode::Object(a));
        assert_eq!(reward_det(&g3, &q(&plain), &cfg()), 0.5);
    }

    #[test]
    fn vqa_and_orm_values() {
        let hi = yes_ratio(1.0, 0.01);
        let lo = yes_ratio(0.0, 0.01);
        assert!((hi - 1.01 / 1.02).abs() < 1e-15);
        assert!((hi - 0.990196).abs() < 1e-6);
        assert!((lo - 0.01 / 1.02).abs() < 1e-15);
        assert_eq!(yes_ratio(0.5, 0.01), 0.5);

        let a = ObjectSpec::new(0, 0);
        let spec = SceneSpec { objects: vec![a], ..Default::default() };
        let mut g = GridImage::empty(4, 4);
        assert_eq!(reward_vqa(&g, &q(&spec), &cfg()), lo);
        assert_eq!(reward_orm(&g, &q(&spec), &cfg()), lo);
        g.set(0, 0, CellCode::Object(ObjectSpec::new(0, 3)));
        assert_eq!(reward_vqa(&g, &q(&spec), &cfg()), 0.5);
        // shape present, attribute wrong: half the constraints
        assert_eq!(reward_orm(&g, &q(&spec), &cfg()), 0.5);
        g.set(1, 1, CellCode::Object(a));
        assert_eq!(reward_vqa(&g, &q(&spec), &cfg()), hi);
        assert_eq!(reward_orm(&g, &q(&spec), &cfg()), hi);
    }

    #[test]
    fn hpm_extremes() {
        assert_eq!(reward_hpm(&GridImage::empty(8, 8), &cfg()), 1.0);
        let mut g = GridImage::empty(8, 8);
        for r in 0..8 {
            for c in 0..8 {
                g.set(r, c, CellCode::Object(ObjectSpec::new(((r + c) % 2) as u8, 0)));
            }
        }
        let p = hpm_parts(&g, 16);
        assert_eq!(p.clutter, 1.0);
        assert_eq!(p.contiguity, 0.0);
        assert_eq!(reward_hpm(&g, &cfg()), 0.0);
    }

    #[test]
    fn max_pairs_formula() {
        // brute force over all subsets of a 4x4 board for small n
        let mut best = [0usize; 17];
        for mask in 0u32..(1 << 16) {
            let n = mask.count_ones() as usize;
            let mut pairs = 0;
            for i in 0..16 {
                if mask >> i & 1 == 1 {
                    if i % 4 < 3 && mask >> (i + 1) & 1 == 1 {
                        pairs += 1;
                    }
                    if i < 12 && mask >> (i + 4) & 1 == 1 {
                        pairs += 1;
                    }
                }
            }
            best[n] = best[n].max(pairs);
        }
        for (n, &b) in best.iter().enumerate() {
            assert_eq!(max_adjacent_pairs(n), b, "n = {n}");
        }
    }

    #[test]
    fn ensemble_means() {
        let only_h = ExpertMask { hpm: true, det: false, vqa: false, orm: false };
        assert_eq!(ensemble_reward([0.3, 0.9, 0.9, 0.9], only_h).unwrap().final_reward, 0.3);
        let hd = ExpertMask::from_flags("hd").unwrap();
        assert_eq!(ensemble_reward([1.0, 0.5, 0.0, 0.0], hd).unwrap().final_reward, 0.75);
        let hdv = ExpertMask::from_flags("hdv").unwrap();
        let base = ensemble_reward([0.2, 0.5, 0.8, 0.0], hdv).unwrap().final_reward;
        let all = ensemble_reward([0.2, 0.5, 0.8, base], ExpertMask::default()).unwrap().final_reward;
        assert!((all - base).abs() < 1e-15);
        assert!(matches!(ensemble_reward([0.0; 4], ExpertMask { hpm: false, det: false, vqa: false, orm: false }), Err(RewardError::NoExpertEnabled)));
        assert!(ExpertMask::from_flags("").is_none());
        assert!(ExpertMask::from_flags("hx").is_none());
        assert_eq!(ExpertMask::from_flags("ovdh").unwrap().flags(), "HDVO");
    }

    #[test]
    fn rendered_scenes_score_perfect_detection() {
        let world = Grammar::default_world();
        for spec in world.enumerate_specs() {
            let qs = q(&spec);
            let g = render_scene(&qs, 8, 8);
            assert_eq!(reward_det(&g, &qs, &cfg()), 1.0, "{}", world.render(&spec));
            assert_eq!(constraint_fraction(&g, &qs, &cfg()), 1.0);
        }
    }
}
