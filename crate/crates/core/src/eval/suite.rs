use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::domain::{SceneSpec, World};
use crate::grpo::PromptPool;
use crate::rollout::Prompt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Color,
    Shape,
    Spatial,
    Counting,
    Complex,
    Knowledge,
}

impl Category {
    pub const ALL: [Category; 6] = [Category::Color, Category::Shape, Category::Spatial, Category::Counting, Category::Complex, Category::Knowledge];

    pub fn name(self) -> &'static str {
        match self {
            Category::Color => "color",
            Category::Shape => "shape",
            Category::Spatial => "spatial",
            Category::Counting => "counting",
            Category::Complex => "complex",
            Category::Knowledge => "knowledge",
        }
    }

    /// Single objects and pairs sharing a shape bind colors; pairs sharing a
    /// color bind shapes; pairs differing in both are complex.
    pub fn of(spec: &SceneSpec) -> Category {
        if spec.knowledge_key.is_some() {
            Category::Knowledge
        } else if spec.counts.is_some() {
            Category::Counting
        } else if spec.relation.is_some() {
            Category::Spatial
        } else if spec.objects.len() < 2 || spec.objects[0].shape == spec.objects[1].shape {
            Category::Color
        } else if spec.objects[0].color == spec.objects[1].color {
            Category::Shape
        } else {
            Category::Complex
        }
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown category `{s}`"))
    }
}

/// Held-out prompts by category.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSuite {
    pub categories: BTreeMap<Category, Vec<Prompt>>,
}

pub const DEFAULT_SUITE: &str = include_str!("../../assets/default.suite");

impl BenchmarkSuite {
    /// Reads lines of the form `prompt <category> <text>`; `#` starts a comment.
    pub fn parse(text: &str, world: &World) -> Result<Self, EvalError> {
        let mut categories: BTreeMap<Category, Vec<Prompt>> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |m: String| EvalError::Suite { line: i + 1, reason: m };
            let mut parts = line.splitn(3, char::is_whitespace);
            if parts.next() != Some("prompt") {
                return Err(bad("expected `prompt <category> <text>`".into()));
            }
            let cat: Category = parts.next().unwrap_or("").parse().map_err(bad)?;
            let prompt = Prompt::parse(world, parts.next().unwrap_or("").trim()).map_err(|e| bad(e.to_string()))?;
            categories.entry(cat).or_default().push(prompt);
        }
        if categories.is_empty() {
            return Err(EvalError::Empty);
        }
        Ok(Self { categories })
    }

    pub fn default_suite(world: &World) -> Self {
        Self::parse(DEFAULT_SUITE, world).expect("bundled suite matches the default world")
    }

    /// Picks `per_category` prompts of each category from the full enumeration,
    /// ordered by a checksum of their text.
    pub fn select(world: &World, per_category: usize) -> Self {
        let mut by_cat: BTreeMap<Category, Vec<(u32, SceneSpec)>> = BTreeMap::new();
        for spec in world.grammar.enumerate_specs() {
            let key = crc32fast::hash(world.grammar.render(&spec).as_bytes());
            by_cat.entry(Category::of(&spec)).or_default().push((key, spec));
        }
        let categories = by_cat
            .into_iter()
            .map(|(cat, mut specs)| {
                specs.sort_by_key(|(k, _)| *k);
                let prompts = specs.iter().take(per_category).map(|(_, s)| Prompt::from_spec(world, s).expect("enumerated specs are valid")).collect();
                (cat, prompts)
            })
            .collect();
        Self { categories }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (cat, prompts) in &self.categories {
            for p in prompts {
                writeln!(out, "prompt {} {}", cat.name(), p.text).expect("writing to a string");
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.categories.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn texts(&self) -> BTreeSet<&str> {
        self.categories.values().flatten().map(|p| p.text.as_str()).collect()
    }

    pub fn check_disjoint(&self, pool: &PromptPool) -> Result<(), EvalError> {
        let held_out = self.texts();
        match pool.strata.iter().flatten().find(|p| held_out.contains(p.text.as_str())) {
            Some(p) => Err(EvalError::Overlap(p.text.clone())),
            None => Ok(()),
        }
    }
}

/// Every enumerable prompt not held out by `suite`, stratified by category.
pub fn training_pool(world: &World, suite: &BenchmarkSuite) -> PromptPool {
    let held_out = suite.texts();
    let mut strata: BTreeMap<Category, Vec<Prompt>> = BTreeMap::new();
    for spec in world.grammar.enumerate_specs() {
        let text = world.grammar.render(&spec);
        if held_out.contains(text.as_str()) {
            continue;
        }
        strata.entry(Category::of(&spec)).or_default().push(Prompt::from_spec(world, &spec).expect("enumerated specs are valid"));
    }
    PromptPool::new(strata.into_values().collect()).expect("the grammar yields training prompts")
}
