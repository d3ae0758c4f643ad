use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::grid::ObjectSpec;
use super::vocab::{TokenId, Vocab};
use super::{Color, DomainError, Shape};

const ARTICLES: [&str; 2] = ["a", "an"];
const FUNCTION_WORDS: [&str; 9] = ["a", "an", "and", "the", "left", "right", "of", "above", "below"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    LeftOf,
    RightOf,
    Above,
    Below,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::LeftOf, Direction::RightOf, Direction::Above, Direction::Below];

    fn words(self) -> &'static [&'static str] {
        match self {
            Direction::LeftOf => &["left", "of"],
            Direction::RightOf => &["right", "of"],
            Direction::Above => &["above"],
            Direction::Below => &["below"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub subject: usize,
    pub object: usize,
    pub direction: Direction,
}

/// Ground-truth parse of a prompt.
///
/// A scene names literal objects, a knowledge key, or both. Relations and
/// counts never appear together.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SceneSpec {
    pub objects: Vec<ObjectSpec>,
    pub relation: Option<Relation>,
    pub counts: Option<Vec<u32>>,
    pub knowledge_key: Option<String>,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), DomainError> {
        let bad = |m: &str| Err(DomainError::InvalidSpec(m.to_string()));
        if self.objects.is_empty() && self.knowledge_key.is_none() {
            return bad("scene names no object");
        }
        if let Some(r) = &self.relation {
            if r.subject >= self.objects.len() || r.object >= self.objects.len() || r.subject == r.object {
                return bad("relation indices out of range");
            }
            if self.counts.is_some() {
                return bad("relation and counts are mutually exclusive");
            }
        }
        if let Some(c) = &self.counts {
            if c.len() != self.objects.len() || c.contains(&0) {
                return bad("counts must be >= 1, one per object");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeTable {
    entries: BTreeMap<String, ObjectSpec>,
}

impl KnowledgeTable {
    pub fn insert(&mut self, key: impl Into<String>, value: ObjectSpec) -> Result<(), DomainError> {
        let key = key.into();
        if self.entries.contains_key(&key) {
            return Err(DomainError::Asset(format!("duplicate knowledge key `{key}`")));
        }
        self.entries.insert(key, value);
        Ok(())
    }

    pub fn lookup(&self, key: &str) -> Result<ObjectSpec, DomainError> {
        self.entries.get(key).copied().ok_or_else(|| DomainError::UnknownKey(key.to_string()))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn knowledge_lookup(key: &str, table: &KnowledgeTable) -> Result<ObjectSpec, DomainError> {
    table.lookup(key)
}

/// The closed prompt grammar plus the world it describes.
#[derive(Debug, Clone)]
pub struct Grammar {
    shapes: Vec<(String, String)>,
    colors: Vec<String>,
    numbers: Vec<(String, u32)>,
    knowledge: KnowledgeTable,
    instruction: Vec<String>,
    cot_words: Vec<String>,
}

pub const DEFAULT_ASSET: &str = include_str!("../../assets/default.grammar");

impl Grammar {
    pub fn default_world() -> Self {
        Self::from_asset(DEFAULT_ASSET).expect("bundled grammar asset is valid")
    }

    pub fn from_asset(text: &str) -> Result<Self, DomainError> {
        let mut g = Grammar {
            shapes: Vec::new(),
            colors: Vec::new(),
            numbers: Vec::new(),
            knowledge: KnowledgeTable::default(),
            instruction: Vec::new(),
            cot_words: Vec::new(),
        };
        let mut pending_knowledge = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let err = || DomainError::Asset(format!("line {}: malformed `{}`", lineno + 1, line));
            match (fields[0], &fields[1..]) {
                ("shape", [s, p]) => g.shapes.push((s.to_string(), p.to_string())),
                ("color", [c]) => g.colors.push(c.to_string()),
                ("number", [w, n]) => g.numbers.push((w.to_string(), n.parse().map_err(|_| err())?)),
                ("knowledge", [k, s, c]) => pending_knowledge.push((k.to_string(), s.to_string(), c.to_string())),
                ("instruction", ws) if !ws.is_empty() => g.instruction.extend(ws.iter().map(|w| w.to_string())),
                ("cot", ws) if !ws.is_empty() => g.cot_words.extend(ws.iter().map(|w| w.to_string())),
                _ => return Err(err()),
            }
        }
        if g.shapes.is_empty() || g.colors.is_empty() || g.numbers.is_empty() {
            return Err(DomainError::Asset("asset needs at least one shape, color and number".into()));
        }
        if g.shapes.len() > u8::MAX as usize || g.colors.len() > u8::MAX as usize {
            return Err(DomainError::Asset("too many shapes or colors".into()));
        }
        if g.numbers.iter().any(|(_, n)| *n == 0) {
            return Err(DomainError::Asset("count words must denote n >= 1".into()));
        }
        for (key, s, c) in pending_knowledge {
            let shape = g.shape_by_word(&s).ok_or_else(|| DomainError::Asset(format!("knowledge `{key}`: unknown shape `{s}`")))?;
            let color = g.color_by_word(&c).ok_or_else(|| DomainError::Asset(format!("knowledge `{key}`: unknown color `{c}`")))?;
            g.knowledge.insert(key, ObjectSpec { shape, color })?;
        }
        Ok(g)
    }

    pub fn knowledge(&self) -> &KnowledgeTable {
        &self.knowledge
    }

    pub fn shape_names(&self) -> Vec<String> {
        self.shapes.iter().map(|(s, _)| s.clone()).collect()
    }

    pub fn color_names(&self) -> Vec<String> {
        self.colors.clone()
    }

    pub fn numbers(&self) -> impl Iterator<Item = u32> + '_ {
        self.numbers.iter().map(|(_, n)| *n)
    }

    pub fn n_shapes(&self) -> u8 {
        self.shapes.len() as u8
    }

    pub fn n_colors(&self) -> u8 {
        self.colors.len() as u8
    }

    /// Every word the grammar, instruction and planning text can use, in
    /// first-seen order.
    pub fn words(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut push = |w: &str| {
            if !out.iter().any(|x| x == w) {
                out.push(w.to_string());
            }
        };
        FUNCTION_WORDS.iter().for_each(|w| push(w));
        for (s, p) in &self.shapes {
            push(s);
            push(p);
        }
        self.colors.iter().for_each(|c| push(c));
        self.numbers.iter().for_each(|(w, _)| push(w));
        self.knowledge.keys().for_each(&mut push);
        self.instruction.iter().for_each(|w| push(w));
        self.cot_words.iter().for_each(|w| push(w));
        out
    }

    pub fn build_vocab(&self) -> Vocab {
        Vocab::new(&self.words(), self.n_shapes(), self.n_colors()).expect("grammar words are unique")
    }

    pub fn instruction_tokens(&self, vocab: &Vocab) -> Result<Vec<TokenId>, DomainError> {
        tokenize_words(self.instruction.iter().map(String::as_str), vocab)
    }

    fn shape_by_word(&self, w: &str) -> Option<Shape> {
        self.shapes.iter().position(|(s, _)| s == w).map(|i| Shape(i as u8))
    }

    fn shape_by_plural(&self, w: &str) -> Option<Shape> {
        self.shapes.iter().position(|(_, p)| p == w).map(|i| Shape(i as u8))
    }

    fn color_by_word(&self, w: &str) -> Option<Color> {
        self.colors.iter().position(|c| c == w).map(|i| Color(i as u8))
    }

    fn number_by_word(&self, w: &str) -> Option<u32> {
        self.numbers.iter().find(|(x, _)| x == w).map(|(_, n)| *n)
    }

    fn number_word(&self, n: u32) -> Option<&str> {
        self.numbers.iter().find(|(_, x)| *x == n).map(|(w, _)| w.as_str())
    }

    pub fn object_phrase(&self, o: ObjectSpec) -> String {
        let color = &self.colors[o.color.0 as usize];
        let article = if color.starts_with(['a', 'e', 'i', 'o', 'u']) { "an" } else { "a" };
        format!("{article} {color} {}", self.shapes[o.shape.0 as usize].0)
    }

    /// Canonical rendering; `parse(render(spec)) == spec` for every valid spec.
    pub fn render(&self, spec: &SceneSpec) -> String {
        let mut parts: Vec<String> = Vec::new();
        if let Some(key) = &spec.knowledge_key {
            parts.push(format!("the {key}"));
        }
        if let Some(counts) = &spec.counts {
            for (o, &n) in spec.objects.iter().zip(counts) {
                let (s, p) = &self.shapes[o.shape.0 as usize];
                let word = self.number_word(n).map(str::to_string).unwrap_or_else(|| n.to_string());
                let noun = if n == 1 { s } else { p };
                parts.push(format!("{word} {} {noun}", self.colors[o.color.0 as usize]));
            }
        } else if let Some(r) = &spec.relation {
            let rel = r.direction.words().join(" ");
            return format!("{} {rel} {}", self.object_phrase(spec.objects[r.subject]), self.object_phrase(spec.objects[r.object]));
        } else {
            parts.extend(spec.objects.iter().map(|&o| self.object_phrase(o)));
        }
        parts.join(" and ")
    }

    pub fn parse(&self, text: &str) -> Result<SceneSpec, DomainError> {
        let words: Vec<&str> = text.split_whitespace().collect();
        let mut p = Parser { g: self, words: &words, pos: 0 };
        let spec = p.prompt()?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn tokenize(&self, text: &str, vocab: &Vocab) -> Result<Vec<TokenId>, DomainError> {
        tokenize_words(text.split_whitespace(), vocab)
    }

    /// Enumerates every scene up to two literal objects, in a fixed order.
    pub fn enumerate_specs(&self) -> Vec<SceneSpec> {
        let objects: Vec<ObjectSpec> = (0..self.n_shapes()).flat_map(|s| (0..self.n_colors()).map(move |c| ObjectSpec::new(s, c))).collect();
        let numbers: Vec<u32> = self.numbers().collect();
        let mut out = Vec::new();
        for &a in &objects {
            out.push(SceneSpec { objects: vec![a], ..Default::default() });
            for &n in &numbers {
                out.push(SceneSpec { objects: vec![a], counts: Some(vec![n]), ..Default::default() });
            }
        }
        for &a in &objects {
            for &b in &objects {
                if a == b {
                    continue;
                }
                out.push(SceneSpec { objects: vec![a, b], ..Default::default() });
                for d in Direction::ALL {
                    let relation = Some(Relation { subject: 0, object: 1, direction: d });
                    out.push(SceneSpec { objects: vec![a, b], relation, ..Default::default() });
                }
                for &n in &numbers {
                    for &m in &numbers {
                        out.push(SceneSpec { objects: vec![a, b], counts: Some(vec![n, m]), ..Default::default() });
                    }
                }
            }
        }
        for key in self.knowledge.keys() {
            out.push(SceneSpec { knowledge_key: Some(key.to_string()), ..Default::default() });
            for &a in &objects {
                out.push(SceneSpec { objects: vec![a], knowledge_key: Some(key.to_string()), ..Default::default() });
            }
        }
        out
    }
}

fn tokenize_words<'a>(words: impl Iterator<Item = &'a str>, vocab: &Vocab) -> Result<Vec<TokenId>, DomainError> {
    words
        .enumerate()
        .map(|(i, w)| vocab.word_id(w).ok_or_else(|| DomainError::Grammar { position: i, token: w.to_string(), reason: "not in vocabulary".into() }))
        .collect()
}

struct Parser<'g, 'w> {
    g: &'g Grammar,
    words: &'w [&'w str],
    pos: usize,
}

impl Parser<'_, '_> {
    fn peek(&self) -> Option<&str> {
        self.words.get(self.pos).copied()
    }

    fn fail<T>(&self, reason: &str) -> Result<T, DomainError> {
        Err(DomainError::Grammar { position: self.pos, token: self.peek().unwrap_or("<end>").to_string(), reason: reason.to_string() })
    }

    fn next(&mut self) -> Option<&str> {
        let w = self.words.get(self.pos).copied();
        self.pos += 1;
        w
    }

    fn expect(&mut self, word: &str) -> Result<(), DomainError> {
        if self.peek() == Some(word) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail(&format!("expected `{word}`"))
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.words.len()
    }

    fn prompt(&mut self) -> Result<SceneSpec, DomainError> {
        match self.peek() {
            Some("the") => self.knowledge(),
            Some(w) if ARTICLES.contains(&w) => self.literal(),
            Some(w) if self.g.number_by_word(w).is_some() => self.counted(),
            _ => self.fail("expected an article, a count word or `the`"),
        }
    }

    fn knowledge(&mut self) -> Result<SceneSpec, DomainError> {
        self.expect("the")?;
        let key = match self.peek() {
            Some(k) if self.g.knowledge.entries.contains_key(k) => k.to_string(),
            _ => return self.fail("unknown knowledge key"),
        };
        self.pos += 1;
        let mut spec = SceneSpec { knowledge_key: Some(key), ..Default::default() };
        if !self.at_end() {
            self.expect("and")?;
            spec.objects.push(self.object()?);
        }
        self.end()?;
        Ok(spec)
    }

    fn literal(&mut self) -> Result<SceneSpec, DomainError> {
        let first = self.object()?;
        let mut spec = SceneSpec { objects: vec![first], ..Default::default() };
        if self.at_end() {
            return Ok(spec);
        }
        match self.peek() {
            Some("and") => {
                while self.peek() == Some("and") {
                    self.pos += 1;
                    spec.objects.push(self.object()?);
                }
            }
            _ => {
                let direction = self.direction()?;
                spec.objects.push(self.object()?);
                spec.relation = Some(Relation { subject: 0, object: 1, direction });
            }
        }
        self.end()?;
        Ok(spec)
    }

    fn counted(&mut self) -> Result<SceneSpec, DomainError> {
        let mut objects = Vec::new();
        let mut counts = Vec::new();
        loop {
            let n = match self.peek().and_then(|w| self.g.number_by_word(w)) {
                Some(n) => n,
                None => return self.fail("expected a count word"),
            };
            self.pos += 1;
            let color = self.color()?;
            let shape = match self.peek() {
                Some(w) if n == 1 => self.g.shape_by_word(w),
                Some(w) => self.g.shape_by_plural(w),
                None => None,
            };
            let Some(shape) = shape else {
                return self.fail(if n == 1 { "expected a singular shape" } else { "expected a plural shape" });
            };
            self.pos += 1;
            objects.push(ObjectSpec { shape, color });
            counts.push(n);
            if self.peek() == Some("and") {
                self.pos += 1;
            } else {
                break;
            }
        }
        self.end()?;
        Ok(SceneSpec { objects, counts: Some(counts), ..Default::default() })
    }

    fn object(&mut self) -> Result<ObjectSpec, DomainError> {
        match self.peek() {
            Some(w) if ARTICLES.contains(&w) => self.pos += 1,
            _ => return self.fail("expected `a` or `an`"),
        }
        let color = self.color()?;
        let shape = match self.peek().and_then(|w| self.g.shape_by_word(w)) {
            Some(s) => s,
            None => return self.fail("unknown shape"),
        };
        self.pos += 1;
        Ok(ObjectSpec { shape, color })
    }

    fn color(&mut self) -> Result<Color, DomainError> {
        match self.peek().and_then(|w| self.g.color_by_word(w)) {
            Some(c) => {
                self.pos += 1;
                Ok(c)
            }
            None => self.fail("unknown color"),
        }
    }

    fn direction(&mut self) -> Result<Direction, DomainError> {
        let d = match self.peek() {
            Some("left") => Direction::LeftOf,
            Some("right") => Direction::RightOf,
            Some("above") => Direction::Above,
            Some("below") => Direction::Below,
            _ => return self.fail("expected `and` or a spatial relation"),
        };
        self.next();
        if matches!(d, Direction::LeftOf | Direction::RightOf) {
            self.expect("of")?;
        }
        Ok(d)
    }

    fn end(&self) -> Result<(), DomainError> {
        if self.at_end() {
            Ok(())
        } else {
            self.fail("trailing input")
        }
    }
}
