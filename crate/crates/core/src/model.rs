//! System model: the part tree, criteria, weights, compatibility tables and
//! model-level configuration, plus validation and design-space counting.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Direction of an ordinal criterion scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Maximize,
    Minimize,
}

impl Orientation {
    pub fn keyword(self) -> &'static str {
        match self {
            Orientation::Maximize => "maximize",
            Orientation::Minimize => "minimize",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub id: String,
    #[serde(default)]
    pub label: String,
    pub orientation: Orientation,
    pub scale_lo: i64,
    pub scale_hi: i64,
}

impl Criterion {
    pub fn width(&self) -> i64 {
        self.scale_hi - self.scale_lo
    }
}

/// Resolved per-part weight vector (magnitudes only; signs live in the
/// criteria orientations).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightAssignment {
    pub part_id: String,
    pub magnitudes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternative {
    pub id: String,
    #[serde(default)]
    pub label: String,
    pub estimates: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub given_priority: Option<u32>,
}

/// Signed value of an estimate so that larger is better on every criterion.
pub fn oriented_value(alt: &Alternative, criterion_index: usize, criterion: &Criterion) -> i64 {
    let raw = alt.estimates[criterion_index];
    match criterion.orientation {
        Orientation::Maximize => raw,
        Orientation::Minimize => -raw,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafPart {
    pub id: String,
    #[serde(default)]
    pub label: String,
    pub alternatives: Vec<Alternative>,
}

impl LeafPart {
    pub fn alternative(&self, id: &str) -> Option<&Alternative> {
        self.alternatives.iter().find(|a| a.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositePart {
    pub id: String,
    #[serde(default)]
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    pub children: Vec<Part>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Part {
    Leaf(LeafPart),
    Composite(CompositePart),
}

impl Part {
    pub fn id(&self) -> &str {
        match self {
            Part::Leaf(l) => &l.id,
            Part::Composite(c) => &c.id,
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Part::Leaf(l) => &l.label,
            Part::Composite(c) => &c.label,
        }
    }

    pub fn as_leaf(&self) -> Option<&LeafPart> {
        match self {
            Part::Leaf(l) => Some(l),
            Part::Composite(_) => None,
        }
    }

    pub fn as_composite(&self) -> Option<&CompositePart> {
        match self {
            Part::Composite(c) => Some(c),
            Part::Leaf(_) => None,
        }
    }

    /// Depth-first search for a part by id.
    pub fn find(&self, id: &str) -> Option<&Part> {
        if self.id() == id {
            return Some(self);
        }
        match self {
            Part::Leaf(_) => None,
            Part::Composite(c) => c.children.iter().find_map(|ch| ch.find(id)),
        }
    }

    /// Leaves of this subtree in left-to-right order.
    pub fn leaves(&self) -> Vec<&LeafPart> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a LeafPart>) {
        match self {
            Part::Leaf(l) => out.push(l),
            Part::Composite(c) => c.children.iter().for_each(|ch| ch.collect_leaves(out)),
        }
    }
}

/// Ordinal compatibility between the alternatives of two leaves. Stored once
/// per unordered leaf pair; entries are keyed `(alt of leaf_a, alt of leaf_b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityTable {
    pub leaf_a: String,
    pub leaf_b: String,
    #[serde(with = "entry_list")]
    pub entries: BTreeMap<(String, String), u32>,
}

impl CompatibilityTable {
    pub fn covers(&self, leaf_x: &str, leaf_y: &str) -> bool {
        (self.leaf_a == leaf_x && self.leaf_b == leaf_y)
            || (self.leaf_a == leaf_y && self.leaf_b == leaf_x)
    }

    /// Entry lookup in either orientation.
    pub fn get(&self, alt_x: &str, alt_y: &str) -> Option<u32> {
        self.entries
            .get(&(alt_x.to_string(), alt_y.to_string()))
            .or_else(|| self.entries.get(&(alt_y.to_string(), alt_x.to_string())))
            .copied()
    }
}

mod entry_list {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Entry {
        a: String,
        b: String,
        level: u32,
    }

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<(String, String), u32>,
        ser: S,
    ) -> Result<S::Ok, S::Error> {
        let list: Vec<Entry> = map
            .iter()
            .map(|((a, b), level)| Entry {
                a: a.clone(),
                b: b.clone(),
                level: *level,
            })
            .collect();
        list.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        de: D,
    ) -> Result<BTreeMap<(String, String), u32>, D::Error> {
        let list = Vec::<Entry>::deserialize(de)?;
        let mut map = BTreeMap::new();
        for e in list {
            if map.insert((e.a.clone(), e.b.clone()), e.level).is_some() {
                return Err(serde::de::Error::custom(format!(
                    "duplicate compatibility entry ({}, {})",
                    e.a, e.b
                )));
            }
        }
        Ok(map)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Number of priority levels.
    pub k: u32,
    /// Best compatibility level.
    pub l: u32,
    pub default_compat: u32,
    pub concordance_p: f64,
    pub discordance_q: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            k: 3,
            l: 3,
            default_compat: 3,
            concordance_p: 0.65,
            discordance_q: 0.35,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemModel {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub config: ModelConfig,
    pub criteria: Vec<Criterion>,
    pub root: Part,
    #[serde(default)]
    pub compat: Vec<CompatibilityTable>,
}

impl SystemModel {
    pub fn find_part(&self, id: &str) -> Option<&Part> {
        self.root.find(id)
    }

    pub fn leaves(&self) -> Vec<&LeafPart> {
        self.root.leaves()
    }

    /// Leaf owning the alternative with the given id.
    pub fn leaf_of_alternative(&self, alt_id: &str) -> Option<&LeafPart> {
        self.leaves()
            .into_iter()
            .find(|l| l.alternatives.iter().any(|a| a.id == alt_id))
    }

    pub fn alternative(&self, alt_id: &str) -> Option<&Alternative> {
        self.leaf_of_alternative(alt_id)
            .and_then(|l| l.alternative(alt_id))
    }

    pub(crate) fn alternative_mut(&mut self, alt_id: &str) -> Option<&mut Alternative> {
        fn walk<'a>(part: &'a mut Part, alt_id: &str) -> Option<&'a mut Alternative> {
            match part {
                Part::Leaf(l) => l.alternatives.iter_mut().find(|a| a.id == alt_id),
                Part::Composite(c) => c.children.iter_mut().find_map(|ch| walk(ch, alt_id)),
            }
        }
        walk(&mut self.root, alt_id)
    }

    pub fn compat_table(&self, leaf_x: &str, leaf_y: &str) -> Option<&CompatibilityTable> {
        self.compat.iter().find(|t| t.covers(leaf_x, leaf_y))
    }

    /// Weight vector governing each leaf: the nearest composite ancestor
    /// that declares weights.
    pub fn leaf_weights(&self) -> HashMap<String, WeightAssignment> {
        fn walk(
            part: &Part,
            inherited: Option<WeightAssignment>,
            out: &mut HashMap<String, WeightAssignment>,
        ) {
            match part {
                Part::Leaf(l) => {
                    if let Some(w) = inherited {
                        out.insert(l.id.clone(), w);
                    }
                }
                Part::Composite(c) => {
                    let here = match &c.weights {
                        Some(m) => Some(WeightAssignment {
                            part_id: c.id.clone(),
                            magnitudes: m.clone(),
                        }),
                        None => inherited,
                    };
                    for ch in &c.children {
                        walk(ch, here.clone(), out);
                    }
                }
            }
        }
        let mut out = HashMap::new();
        walk(&self.root, None, &mut out);
        out
    }

    /// Every declared weight row, in tree pre-order.
    pub fn weights(&self) -> Vec<WeightAssignment> {
        fn walk(part: &Part, out: &mut Vec<WeightAssignment>) {
            if let Part::Composite(c) = part {
                if let Some(m) = &c.weights {
                    out.push(WeightAssignment {
                        part_id: c.id.clone(),
                        magnitudes: m.clone(),
                    });
                }
                c.children.iter().for_each(|ch| walk(ch, out));
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }
}

/// Number of raw selection tuples: one alternative per leaf, no
/// compatibility filtering.
pub fn design_space_size(model: &SystemModel) -> u128 {
    subtree_space_size(&model.root)
}

pub fn subtree_space_size(part: &Part) -> u128 {
    part.leaves()
        .iter()
        .map(|l| l.alternatives.len() as u128)
        .product()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}: {}: {}", self.path, self.message)
    }
}

/// Model paths, shared between validation and the parser's span table.
pub mod paths {
    pub fn config(key: &str) -> String {
        format!("config.{key}")
    }
    pub fn criterion(id: &str) -> String {
        format!("criteria.{id}")
    }
    pub fn part(parent: Option<&str>, id: &str) -> String {
        match parent {
            Some(p) => format!("{p}/{id}"),
            None => id.to_string(),
        }
    }
    pub fn weights(part_path: &str) -> String {
        format!("{part_path}.weights")
    }
    pub fn weight(part_path: &str, i: usize) -> String {
        format!("{part_path}.weights[{i}]")
    }
    pub fn alt(leaf_path: &str, id: &str) -> String {
        format!("{leaf_path}:{id}")
    }
    pub fn estimates(alt_path: &str) -> String {
        format!("{alt_path}.est")
    }
    pub fn estimate(alt_path: &str, i: usize) -> String {
        format!("{alt_path}.est[{i}]")
    }
    pub fn priority(alt_path: &str) -> String {
        format!("{alt_path}.priority")
    }
    pub fn compat(a: &str, b: &str) -> String {
        format!("compat {a}*{b}")
    }
    pub fn compat_entry(a: &str, b: &str, x: &str, y: &str) -> String {
        format!("compat {a}*{b}({x},{y})")
    }
}

struct Validator<'m> {
    model: &'m SystemModel,
    out: Vec<Diagnostic>,
    part_ids: HashSet<&'m str>,
    alt_ids: HashSet<&'m str>,
}

impl<'m> Validator<'m> {
    fn error(&mut self, path: String, message: String) {
        self.out.push(Diagnostic {
            severity: Severity::Error,
            path,
            message,
        });
    }

    fn config(&mut self) {
        let c = &self.model.config;
        if c.k < 1 {
            self.error(paths::config("k"), "k must be at least 1".into());
        }
        if c.l < 1 {
            self.error(paths::config("l"), "l must be at least 1".into());
        }
        if c.default_compat > c.l {
            self.error(
                paths::config("default_compat"),
                format!("default_compat {} outside 0..{}", c.default_compat, c.l),
            );
        }
        if !(c.concordance_p > 0.5 && c.concordance_p <= 1.0) {
            self.error(
                paths::config("concordance_p"),
                format!("concordance_p {} outside (0.5, 1]", c.concordance_p),
            );
        }
        if !(c.discordance_q >= 0.0 && c.discordance_q < 1.0) {
            self.error(
                paths::config("discordance_q"),
                format!("discordance_q {} outside [0, 1)", c.discordance_q),
            );
        }
    }

    fn criteria(&mut self) {
        if self.model.criteria.is_empty() {
            self.error(
                "criteria".into(),
                "at least one criterion is required".into(),
            );
        }
        let mut seen = HashSet::new();
        for c in &self.model.criteria {
            if !seen.insert(c.id.as_str()) {
                self.error(
                    paths::criterion(&c.id),
                    format!("duplicate criterion id {}", c.id),
                );
            }
            if c.scale_lo >= c.scale_hi {
                self.error(
                    paths::criterion(&c.id),
                    format!("empty scale {}..{}", c.scale_lo, c.scale_hi),
                );
            }
        }
    }

    fn part(&mut self, part: &'m Part, parent: Option<&str>) {
        let path = paths::part(parent, part.id());
        if !self.part_ids.insert(part.id()) {
            self.error(path.clone(), format!("duplicate part id {}", part.id()));
        }
        match part {
            Part::Composite(c) => {
                if c.children.len() < 2 {
                    self.error(
                        path.clone(),
                        format!(
                            "composite {} needs at least 2 children, found {}",
                            c.id,
                            c.children.len()
                        ),
                    );
                }
                if let Some(w) = &c.weights {
                    self.weights(&path, w);
                }
                for ch in &c.children {
                    self.part(ch, Some(&path));
                }
            }
            Part::Leaf(l) => {
                if l.alternatives.is_empty() {
                    self.error(path.clone(), format!("leaf {} has no alternatives", l.id));
                }
                for a in &l.alternatives {
                    self.alternative(&path, a);
                }
            }
        }
    }

    fn weights(&mut self, part_path: &str, w: &[f64]) {
        let n = self.model.criteria.len();
        if w.len() != n {
            self.error(
                paths::weights(part_path),
                format!("expected {n} weights, found {}", w.len()),
            );
        }
        for (i, v) in w.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                self.error(
                    paths::weight(part_path, i),
                    format!("weight {v} must be a non-negative number"),
                );
            }
        }
        if !w.iter().any(|v| *v > 0.0) {
            self.error(
                paths::weights(part_path),
                "at least one weight must be positive".into(),
            );
        }
    }

    fn alternative(&mut self, leaf_path: &str, a: &'m Alternative) {
        let path = paths::alt(leaf_path, &a.id);
        if !self.alt_ids.insert(a.id.as_str()) {
            self.error(path.clone(), format!("duplicate alternative id {}", a.id));
        }
        let n = self.model.criteria.len();
        if a.estimates.len() != n {
            self.error(
                paths::estimates(&path),
                format!("expected {n} estimates, found {}", a.estimates.len()),
            );
        }
        for (i, (est, c)) in a.estimates.iter().zip(&self.model.criteria).enumerate() {
            if *est < c.scale_lo || *est > c.scale_hi {
                self.error(
                    paths::estimate(&path, i),
                    format!(
                        "alternative {}: estimate {est} on {} outside scale {}..{}",
                        a.id, c.id, c.scale_lo, c.scale_hi
                    ),
                );
            }
        }
        if let Some(p) = a.given_priority {
            let k = self.model.config.k;
            if p < 1 || p > k {
                self.error(
                    paths::priority(&path),
                    format!("alternative {}: priority {p} outside 1..{k}", a.id),
                );
            }
        }
    }

    fn compat(&mut self) {
        let leaves: HashMap<&str, &LeafPart> = self
            .model
            .leaves()
            .into_iter()
            .map(|l| (l.id.as_str(), l))
            .collect();
        let mut pairs = HashSet::new();
        let l_max = self.model.config.l;
        for t in &self.model.compat {
            let path = paths::compat(&t.leaf_a, &t.leaf_b);
            if t.leaf_a == t.leaf_b {
                self.error(
                    path.clone(),
                    format!("table relates leaf {} to itself", t.leaf_a),
                );
                continue;
            }
            let key = if t.leaf_a < t.leaf_b {
                (t.leaf_a.as_str(), t.leaf_b.as_str())
            } else {
                (t.leaf_b.as_str(), t.leaf_a.as_str())
            };
            if !pairs.insert(key) {
                self.error(
                    path.clone(),
                    format!("duplicate table for leaves {} and {}", t.leaf_a, t.leaf_b),
                );
            }
            let (Some(la), Some(lb)) =
                (leaves.get(t.leaf_a.as_str()), leaves.get(t.leaf_b.as_str()))
            else {
                for id in [&t.leaf_a, &t.leaf_b] {
                    if !leaves.contains_key(id.as_str()) {
                        self.error(path.clone(), format!("unknown leaf {id}"));
                    }
                }
                continue;
            };
            let a_ids: BTreeSet<&str> = la.alternatives.iter().map(|a| a.id.as_str()).collect();
            let b_ids: BTreeSet<&str> = lb.alternatives.iter().map(|a| a.id.as_str()).collect();
            for ((x, y), level) in &t.entries {
                let epath = paths::compat_entry(&t.leaf_a, &t.leaf_b, x, y);
                if !a_ids.contains(x.as_str()) {
                    self.error(
                        epath.clone(),
                        format!("unknown alternative {x} in leaf {}", t.leaf_a),
                    );
                }
                if !b_ids.contains(y.as_str()) {
                    self.error(
                        epath.clone(),
                        format!("unknown alternative {y} in leaf {}", t.leaf_b),
                    );
                }
                if *level > l_max {
                    self.error(
                        epath,
                        format!("compatibility ({x}, {y}) = {level} outside 0..{l_max}"),
                    );
                }
            }
            for x in &a_ids {
                for y in &b_ids {
                    if !t.entries.contains_key(&(x.to_string(), y.to_string())) {
                        self.error(
                            path.clone(),
                            format!("table is not total: missing entry ({x}, {y})"),
                        );
                    }
                }
            }
        }
    }
}

/// Checks every model invariant; an empty result means the model is valid.
pub fn validate(model: &SystemModel) -> Vec<Diagnostic> {
    let mut v = Validator {
        model,
        out: Vec::new(),
        part_ids: HashSet::new(),
        alt_ids: HashSet::new(),
    };
    v.config();
    v.criteria();
    v.part(&model.root, None);
    v.compat();
    v.out
}
