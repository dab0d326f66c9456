//! Morphological clique composition.
//!
//! A composite part is solved by choosing one candidate per child such that
//! every pair of chosen candidates is compatible (level >= 1). Each feasible
//! selection gets a quality vector `(w; n_1..n_k)`: `w` is the minimum
//! pairwise compatibility and `n_r` counts members of priority `r`. The
//! nondominated selections form the node's frontier, which is carried up
//! the tree as the candidate list of the parent.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CompatibilityTable, CompositePart, Part, SystemModel};
use crate::ranking::{resolve_priorities, RankingError, RankingParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompositionError {
    #[error("compatibility table {leaf_a}*{leaf_b} has no entry for ({alt_a}, {alt_b})")]
    MissingEntry {
        leaf_a: String,
        alt_a: String,
        leaf_b: String,
        alt_b: String,
    },
    #[error("no feasible combination at node {node}")]
    Infeasible { node: String },
    #[error("quality vectors have different level counts ({0} vs {1})")]
    ShapeMismatch(usize, usize),
    #[error("unknown part {0}")]
    UnknownNode(String),
    #[error("part {0} is a leaf, not a composite")]
    NotComposite(String),
    #[error("unknown alternative {0}")]
    UnknownAlternative(String),
    #[error("alternatives {0} and {1} belong to the same leaf")]
    SameLeaf(String, String),
    #[error("subtree design space {size} exceeds cap {cap}")]
    CapExceeded { size: u128, cap: u128 },
    #[error("invalid selection for node {node}: {reason}")]
    InvalidSelection { node: String, reason: String },
    #[error(transparent)]
    Ranking(#[from] RankingError),
}

pub type Result<T, E = CompositionError> = std::result::Result<T, E>;

/// `N(S) = (w; n_1..n_k)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QualityVector {
    pub w: u32,
    pub n: Vec<u32>,
}

impl QualityVector {
    pub fn new(w: u32, n: Vec<u32>) -> Self {
        QualityVector { w, n }
    }

    pub fn arity(&self) -> u32 {
        self.n.iter().sum()
    }

    fn prefix_sums(&self) -> impl Iterator<Item = u32> + '_ {
        self.n.iter().scan(0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
    }
}

impl fmt::Display for QualityVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n: Vec<String> = self.n.iter().map(u32::to_string).collect();
        write!(f, "({}; {})", self.w, n.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DominanceResult {
    FirstDominates,
    SecondDominates,
    Equal,
    Incomparable,
}

impl DominanceResult {
    pub fn as_str(self) -> &'static str {
        match self {
            DominanceResult::FirstDominates => "first-dominates",
            DominanceResult::SecondDominates => "second-dominates",
            DominanceResult::Equal => "equal",
            DominanceResult::Incomparable => "incomparable",
        }
    }
}

/// Lattice order: `w` compared directly, `n` by cumulative prefix sums
/// (more members at better levels is better).
pub fn dominates(q1: &QualityVector, q2: &QualityVector) -> Result<DominanceResult> {
    if q1.n.len() != q2.n.len() {
        return Err(CompositionError::ShapeMismatch(q1.n.len(), q2.n.len()));
    }
    if q1 == q2 {
        return Ok(DominanceResult::Equal);
    }
    let mut ge = q1.w >= q2.w;
    let mut le = q1.w <= q2.w;
    for (a, b) in q1.prefix_sums().zip(q2.prefix_sums()) {
        ge &= a >= b;
        le &= a <= b;
    }
    Ok(match (ge, le) {
        (true, false) => DominanceResult::FirstDominates,
        (false, true) => DominanceResult::SecondDominates,
        // both only when identical as prefix sums and w; handled above
        (true, true) => DominanceResult::Equal,
        (false, false) => DominanceResult::Incomparable,
    })
}

fn strictly_dominates(a: &QualityVector, b: &QualityVector) -> bool {
    matches!(dominates(a, b), Ok(DominanceResult::FirstDominates))
}

/// The candidate chosen for one child part.
#[derive(Debug, Clone, PartialEq)]
pub enum Pick {
    Alternative { id: String, priority: u32 },
    Composite(CompositeDecision),
}

impl Pick {
    pub fn priority(&self) -> u32 {
        match self {
            Pick::Alternative { priority, .. } => *priority,
            Pick::Composite(d) => d.effective_priority,
        }
    }

    /// Stable textual key used for ordering: the alternative id, or the
    /// parenthesised selection of a composite.
    pub fn key(&self) -> String {
        match self {
            Pick::Alternative { id, .. } => id.clone(),
            Pick::Composite(d) => format!("({})", d.key()),
        }
    }

    fn collect_leaf_members<'a>(&'a self, part: &'a str, out: &mut Vec<(&'a str, &'a str)>) {
        match self {
            Pick::Alternative { id, .. } => out.push((part, id)),
            Pick::Composite(d) => d.collect_leaf_members(out),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub part: String,
    pub pick: Pick,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeDecision {
    pub node: String,
    pub selection: Vec<Choice>,
    pub quality: QualityVector,
    /// Layer of this decision among its node's decisions; 1 for frontier
    /// members.
    pub effective_priority: u32,
}

impl CompositeDecision {
    pub fn key(&self) -> String {
        self.selection
            .iter()
            .map(|c| c.pick.key())
            .collect::<Vec<_>>()
            .join("*")
    }

    fn sort_key(&self) -> Vec<String> {
        self.selection.iter().map(|c| c.pick.key()).collect()
    }

    /// `(leaf id, alternative id)` of every leaf alternative in the decision.
    pub fn leaf_members(&self) -> Vec<(&str, &str)> {
        let mut out = Vec::new();
        self.collect_leaf_members(&mut out);
        out
    }

    fn collect_leaf_members<'a>(&'a self, out: &mut Vec<(&'a str, &'a str)>) {
        for c in &self.selection {
            c.pick.collect_leaf_members(&c.part, out);
        }
    }

    pub fn pick(&self, part: &str) -> Option<&Pick> {
        self.selection
            .iter()
            .find(|c| c.part == part)
            .map(|c| &c.pick)
    }
}

impl fmt::Display for CompositeDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.key(), self.quality)
    }
}

/// Frontier ordering: w descending, n lexicographically descending, then
/// selection keys ascending.
fn frontier_order(a: &CompositeDecision, b: &CompositeDecision) -> Ordering {
    b.quality
        .w
        .cmp(&a.quality.w)
        .then_with(|| b.quality.n.cmp(&a.quality.n))
        .then_with(|| a.sort_key().cmp(&b.sort_key()))
}

/// Decisions whose quality is not dominated by any other's, sorted.
/// Decisions with equal quality are all kept.
pub fn pareto_frontier(decisions: &[CompositeDecision]) -> Vec<CompositeDecision> {
    let mut qualities: Vec<&QualityVector> = decisions.iter().map(|d| &d.quality).collect();
    qualities.sort_by(|a, b| b.w.cmp(&a.w).then_with(|| b.n.cmp(&a.n)));
    qualities.dedup();
    let efficient: HashSet<&QualityVector> = qualities
        .iter()
        .filter(|q| !qualities.iter().any(|o| strictly_dominates(o, q)))
        .copied()
        .collect();
    let mut out: Vec<CompositeDecision> = decisions
        .iter()
        .filter(|d| efficient.contains(&d.quality))
        .cloned()
        .collect();
    out.sort_by(frontier_order);
    out
}

/// Repeated frontier extraction; layer `i` (1-based) gets
/// `effective_priority = min(i, k)`.
pub fn peel_layers(
    decisions: &[CompositeDecision],
    max_layers: usize,
    k: u32,
) -> Vec<Vec<CompositeDecision>> {
    let mut rest: Vec<CompositeDecision> = decisions.to_vec();
    let mut layers = Vec::new();
    while !rest.is_empty() && layers.len() < max_layers {
        let mut front = pareto_frontier(&rest);
        let taken: HashSet<String> = front.iter().map(CompositeDecision::key).collect();
        rest.retain(|d| !taken.contains(&d.key()));
        let level = ((layers.len() + 1) as u32).min(k);
        for d in &mut front {
            d.effective_priority = level;
        }
        layers.push(front);
    }
    layers
}

/// Table lookup for leaf-alternative pairs with the default rule for
/// uncovered leaf pairs.
pub struct CompatLookup<'m> {
    model: &'m SystemModel,
    tables: HashMap<(&'m str, &'m str), &'m CompatibilityTable>,
}

impl<'m> CompatLookup<'m> {
    pub fn new(model: &'m SystemModel) -> Self {
        let mut tables = HashMap::new();
        for t in &model.compat {
            tables.insert((t.leaf_a.as_str(), t.leaf_b.as_str()), t);
            tables.insert((t.leaf_b.as_str(), t.leaf_a.as_str()), t);
        }
        CompatLookup { model, tables }
    }

    pub fn leaf_pair(&self, leaf_x: &str, alt_x: &str, leaf_y: &str, alt_y: &str) -> Result<u32> {
        match self.tables.get(&(leaf_x, leaf_y)) {
            None => Ok(self.model.config.default_compat),
            Some(t) => {
                let (a, b) = if t.leaf_a == leaf_x {
                    (alt_x, alt_y)
                } else {
                    (alt_y, alt_x)
                };
                t.entries
                    .get(&(a.to_string(), b.to_string()))
                    .copied()
                    .ok_or_else(|| CompositionError::MissingEntry {
                        leaf_a: t.leaf_a.clone(),
                        alt_a: a.to_string(),
                        leaf_b: t.leaf_b.clone(),
                        alt_b: b.to_string(),
                    })
            }
        }
    }

    /// Compatibility of two candidates: the minimum over their cross
    /// leaf-alternative pairs.
    pub fn picks(&self, part_a: &str, a: &Pick, part_b: &str, b: &Pick) -> Result<u32> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        a.collect_leaf_members(part_a, &mut xs);
        b.collect_leaf_members(part_b, &mut ys);
        let mut w = self.model.config.l;
        for (lx, ax) in &xs {
            for (ly, ay) in &ys {
                w = w.min(self.leaf_pair(lx, ax, ly, ay)?);
            }
        }
        Ok(w)
    }
}

/// Compatibility of two alternatives of distinct leaves.
pub fn pair_compatibility(alt_a: &str, alt_b: &str, model: &SystemModel) -> Result<u32> {
    let la = model
        .leaf_of_alternative(alt_a)
        .ok_or_else(|| CompositionError::UnknownAlternative(alt_a.to_string()))?;
    let lb = model
        .leaf_of_alternative(alt_b)
        .ok_or_else(|| CompositionError::UnknownAlternative(alt_b.to_string()))?;
    if la.id == lb.id {
        return Err(CompositionError::SameLeaf(
            alt_a.to_string(),
            alt_b.to_string(),
        ));
    }
    CompatLookup::new(model).leaf_pair(&la.id, alt_a, &lb.id, alt_b)
}

fn count_levels(priorities: impl Iterator<Item = u32>, k: u32) -> Vec<u32> {
    let mut n = vec![0; k as usize];
    for p in priorities {
        n[(p.clamp(1, k) - 1) as usize] += 1;
    }
    n
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Number of peeled layers carried upward from each composite node.
    pub carry_layers: usize,
    /// Ignore given priorities and rank every leaf.
    pub recompute: bool,
    /// Overrides the model's ranking parameters.
    pub params: Option<RankingParams>,
    /// Fixed candidate lists for the named composite nodes.
    pub overrides: BTreeMap<String, Vec<CompositeDecision>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            carry_layers: 1,
            recompute: false,
            params: None,
            overrides: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSolution {
    pub node: String,
    pub frontier: Vec<CompositeDecision>,
    /// Candidates handed to the parent, with their effective priorities.
    pub carried: Vec<CompositeDecision>,
    /// Count of feasible combinations enumerated at this node.
    pub feasible: usize,
}

/// Bottom-up solver over one model snapshot with resolved priorities.
pub struct Composer<'m> {
    model: &'m SystemModel,
    lookup: CompatLookup<'m>,
    priorities: HashMap<String, u32>,
    options: SolveOptions,
}

impl<'m> Composer<'m> {
    pub fn new(model: &'m SystemModel, options: SolveOptions) -> Result<Self> {
        let params = options
            .params
            .unwrap_or_else(|| RankingParams::from_model(model));
        let priorities = resolve_priorities(model, params, options.recompute)?;
        Ok(Composer {
            model,
            lookup: CompatLookup::new(model),
            priorities,
            options,
        })
    }

    pub fn model(&self) -> &'m SystemModel {
        self.model
    }

    pub fn lookup(&self) -> &CompatLookup<'m> {
        &self.lookup
    }

    pub fn priorities(&self) -> &HashMap<String, u32> {
        &self.priorities
    }

    fn k(&self) -> u32 {
        self.model.config.k
    }

    fn composite(&self, id: &str) -> Result<&'m CompositePart> {
        match self.model.find_part(id) {
            None => Err(CompositionError::UnknownNode(id.to_string())),
            Some(Part::Leaf(_)) => Err(CompositionError::NotComposite(id.to_string())),
            Some(Part::Composite(c)) => Ok(c),
        }
    }

    /// `N(S)` of a selection; requires at least two members.
    pub fn quality_vector(&self, selection: &[Choice]) -> Result<QualityVector> {
        if selection.len() < 2 {
            return Err(CompositionError::InvalidSelection {
                node: String::new(),
                reason: format!(
                    "a selection needs at least 2 members, found {}",
                    selection.len()
                ),
            });
        }
        let mut w = self.model.config.l;
        for (i, a) in selection.iter().enumerate() {
            for b in &selection[i + 1..] {
                w = w.min(self.lookup.picks(&a.part, &a.pick, &b.part, &b.pick)?);
            }
        }
        let n = count_levels(selection.iter().map(|c| c.pick.priority()), self.k());
        Ok(QualityVector { w, n })
    }

    /// Candidate list of a part, sorted by key.
    pub fn candidates(&self, part: &Part) -> Result<Vec<Pick>> {
        let mut picks = match part {
            Part::Leaf(l) => l
                .alternatives
                .iter()
                .map(|a| Pick::Alternative {
                    id: a.id.clone(),
                    priority: self.priorities[&a.id].min(self.k()),
                })
                .collect::<Vec<_>>(),
            Part::Composite(c) => match self.options.overrides.get(&c.id) {
                Some(fixed) => fixed.iter().cloned().map(Pick::Composite).collect(),
                None => {
                    let sol = self.solve_composite(c)?;
                    sol.carried.into_iter().map(Pick::Composite).collect()
                }
            },
        };
        picks.sort_by_key(Pick::key);
        Ok(picks)
    }

    /// Every selection with all pairwise compatibilities >= 1, in
    /// lexicographic order of the candidate lists.
    pub fn feasible_combinations(
        &self,
        node: &str,
        children: &[(String, Vec<Pick>)],
    ) -> Result<Vec<CompositeDecision>> {
        let m = children.len();
        if m < 2 {
            return Err(CompositionError::InvalidSelection {
                node: node.to_string(),
                reason: format!("needs at least 2 children, found {m}"),
            });
        }
        // compat[i][j][x][y] for i < j
        let mut compat = vec![vec![Vec::new(); m]; m];
        for i in 0..m {
            for j in i + 1..m {
                let (pi, ci) = &children[i];
                let (pj, cj) = &children[j];
                let mut grid = Vec::with_capacity(ci.len());
                for x in ci {
                    let row = cj
                        .iter()
                        .map(|y| self.lookup.picks(pi, x, pj, y))
                        .collect::<Result<Vec<u32>>>()?;
                    grid.push(row);
                }
                compat[i][j] = grid;
            }
        }

        let mut out = Vec::new();
        let mut chosen = vec![0usize; m];
        let mut mins = vec![self.model.config.l; m + 1];
        let mut depth = 0usize;
        let mut next = vec![0usize; m];
        // iterative depth-first search with pruning on zero pairs
        loop {
            if next[depth] == children[depth].1.len() {
                if depth == 0 {
                    break;
                }
                next[depth] = 0;
                depth -= 1;
                continue;
            }
            let x = next[depth];
            next[depth] += 1;
            let mut w = mins[depth];
            for j in 0..depth {
                w = w.min(compat[j][depth][chosen[j]][x]);
            }
            if w == 0 {
                continue;
            }
            chosen[depth] = x;
            mins[depth + 1] = w;
            if depth + 1 == m {
                let selection: Vec<Choice> = children
                    .iter()
                    .zip(&chosen)
                    .map(|((part, cands), &i)| Choice {
                        part: part.clone(),
                        pick: cands[i].clone(),
                    })
                    .collect();
                let n = count_levels(selection.iter().map(|c| c.pick.priority()), self.k());
                out.push(CompositeDecision {
                    node: node.to_string(),
                    selection,
                    quality: QualityVector { w, n },
                    effective_priority: 1,
                });
            } else {
                depth += 1;
            }
        }
        Ok(out)
    }

    /// Frontier of one node given its children's candidate lists.
    pub fn compose_node(
        &self,
        node: &CompositePart,
        children: Vec<(String, Vec<Pick>)>,
    ) -> Result<NodeSolution> {
        let feasible = self.feasible_combinations(&node.id, &children)?;
        if feasible.is_empty() {
            return Err(CompositionError::Infeasible {
                node: node.id.clone(),
            });
        }
        let layers = peel_layers(&feasible, self.options.carry_layers.max(1), self.k());
        let frontier = layers[0].clone();
        Ok(NodeSolution {
            node: node.id.clone(),
            frontier,
            carried: layers.into_iter().flatten().collect(),
            feasible: feasible.len(),
        })
    }

    fn solve_composite(&self, node: &CompositePart) -> Result<NodeSolution> {
        let children = node
            .children
            .iter()
            .map(|ch| Ok((ch.id().to_string(), self.candidates(ch)?)))
            .collect::<Result<Vec<_>>>()?;
        self.compose_node(node, children)
    }

    pub fn solve_node(&self, id: &str) -> Result<NodeSolution> {
        self.solve_composite(self.composite(id)?)
    }

    pub fn solve(&self) -> Result<NodeSolution> {
        self.solve_node(self.model.root.id())
    }

    /// Rebuilds a decision against this composer's model: leaf priorities
    /// and every compatibility are looked up afresh; composite members get
    /// the layer at which their selection is carried by the re-solved
    /// child node (level `k` when no longer carried).
    pub fn recompute(&self, decision: &CompositeDecision) -> Result<CompositeDecision> {
        let node = self.composite(&decision.node)?;
        let invalid = |reason: String| CompositionError::InvalidSelection {
            node: node.id.clone(),
            reason,
        };
        if decision.selection.len() != node.children.len() {
            return Err(invalid(format!(
                "expected {} members, found {}",
                node.children.len(),
                decision.selection.len()
            )));
        }
        let mut selection = Vec::with_capacity(node.children.len());
        for (child, choice) in node.children.iter().zip(&decision.selection) {
            if child.id() != choice.part {
                return Err(invalid(format!(
                    "expected member {}, found {}",
                    child.id(),
                    choice.part
                )));
            }
            let pick = match (child, &choice.pick) {
                (Part::Leaf(l), Pick::Alternative { id, .. }) => {
                    if l.alternative(id).is_none() {
                        return Err(invalid(format!("{id} is not an alternative of {}", l.id)));
                    }
                    Pick::Alternative {
                        id: id.clone(),
                        priority: self.priorities[id].min(self.k()),
                    }
                }
                (Part::Composite(_), Pick::Composite(inner)) => {
                    let mut rebuilt = self.recompute(inner)?;
                    rebuilt.effective_priority = self.locate(&rebuilt)?;
                    Pick::Composite(rebuilt)
                }
                _ => {
                    return Err(invalid(format!(
                        "member {} has the wrong kind",
                        choice.part
                    )))
                }
            };
            selection.push(Choice {
                part: choice.part.clone(),
                pick,
            });
        }
        let quality = self.quality_vector(&selection)?;
        Ok(CompositeDecision {
            node: node.id.clone(),
            selection,
            quality,
            effective_priority: decision.effective_priority,
        })
    }

    fn locate(&self, decision: &CompositeDecision) -> Result<u32> {
        let key = decision.key();
        let sol = match self.options.overrides.get(&decision.node) {
            Some(fixed) => fixed.clone(),
            None => self.solve_node(&decision.node)?.carried,
        };
        Ok(sol
            .iter()
            .find(|d| d.key() == key)
            .map(|d| d.effective_priority)
            .unwrap_or(self.k()))
    }
}

/// Convenience wrapper: root frontier of the model.
pub fn solve(model: &SystemModel, options: SolveOptions) -> Result<NodeSolution> {
    Composer::new(model, options)?.solve()
}

pub fn solve_node(model: &SystemModel, node: &str, options: SolveOptions) -> Result<NodeSolution> {
    Composer::new(model, options)?.solve_node(node)
}

pub const DEFAULT_BRUTE_FORCE_CAP: u128 = 10_000_000;

/// Flat enumeration of every raw leaf tuple of a subtree; `w` is the
/// minimum over all leaf pairs and `n` counts leaf priorities. Testing
/// oracle: no hierarchical decomposition is involved.
pub fn brute_force_frontier(
    model: &SystemModel,
    node: &str,
    priorities: &HashMap<String, u32>,
    cap: u128,
) -> Result<Vec<CompositeDecision>> {
    let part = model
        .find_part(node)
        .ok_or_else(|| CompositionError::UnknownNode(node.to_string()))?;
    let Part::Composite(_) = part else {
        return Err(CompositionError::NotComposite(node.to_string()));
    };
    let size = crate::model::subtree_space_size(part);
    if size > cap {
        return Err(CompositionError::CapExceeded { size, cap });
    }
    let leaves = part.leaves();
    let lookup = CompatLookup::new(model);
    let k = model.config.k;
    let l = model.config.l;
    let mut feasible = Vec::new();
    let mut idx = vec![0usize; leaves.len()];
    'outer: loop {
        let alts: Vec<&str> = leaves
            .iter()
            .zip(&idx)
            .map(|(leaf, &i)| leaf.alternatives[i].id.as_str())
            .collect();
        let mut w = l;
        for i in 0..leaves.len() {
            for j in i + 1..leaves.len() {
                w = w.min(lookup.leaf_pair(&leaves[i].id, alts[i], &leaves[j].id, alts[j])?);
            }
        }
        if w >= 1 {
            let selection: Vec<Choice> = leaves
                .iter()
                .zip(&alts)
                .map(|(leaf, alt)| Choice {
                    part: leaf.id.clone(),
                    pick: Pick::Alternative {
                        id: alt.to_string(),
                        priority: priorities[*alt].min(k),
                    },
                })
                .collect();
            let n = count_levels(selection.iter().map(|c| c.pick.priority()), k);
            feasible.push(CompositeDecision {
                node: node.to_string(),
                selection,
                quality: QualityVector { w, n },
                effective_priority: 1,
            });
        }
        for pos in (0..leaves.len()).rev() {
            idx[pos] += 1;
            if idx[pos] < leaves[pos].alternatives.len() {
                continue 'outer;
            }
            idx[pos] = 0;
        }
        break;
    }
    if feasible.is_empty() {
        return Err(CompositionError::Infeasible {
            node: node.to_string(),
        });
    }
    Ok(pareto_frontier(&feasible))
}
