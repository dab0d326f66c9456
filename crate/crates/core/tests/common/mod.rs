//! Model generators and independent reference computations shared by the
//! integration suites.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use morphdes::composition::QualityVector;
use morphdes::model::{
    oriented_value, Alternative, CompatibilityTable, CompositePart, Criterion, LeafPart,
    ModelConfig, Orientation, Part, WeightAssignment,
};
use morphdes::{
    dominates, evaluate_actions, json, parse, propose_actions, rank, serialize, validate, Composer,
    DominanceResult, RankingParams, SolveOptions, SystemModel,
};
use proptest::collection::vec;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn criterion(id: &str, orientation: Orientation, lo: i64, hi: i64) -> Criterion {
    Criterion {
        id: id.to_string(),
        label: String::new(),
        orientation,
        scale_lo: lo,
        scale_hi: hi,
    }
}

pub fn alternative(id: &str, estimates: Vec<i64>, priority: Option<u32>) -> Alternative {
    Alternative {
        id: id.to_string(),
        label: String::new(),
        estimates,
        given_priority: priority,
    }
}

/// Compatibility level with roughly 15% zeros.
pub fn compat_level() -> impl Strategy<Value = u32> {
    prop_oneof![3 => Just(0u32), 17 => 1u32..=3]
}

/// One composite node `N` over leaves `P0..`, every leaf pair covered by a
/// total table. `levels` is consumed pair by pair, row-major.
pub fn single_level(sizes: &[usize], priorities: &[u32], levels: &[u32]) -> SystemModel {
    let mut prio = priorities.iter().copied();
    let leaves: Vec<LeafPart> = sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| LeafPart {
            id: format!("P{i}"),
            label: String::new(),
            alternatives: (0..n)
                .map(|j| alternative(&format!("P{i}a{j}"), vec![0], Some(prio.next().unwrap())))
                .collect(),
        })
        .collect();
    let mut level = levels.iter().copied();
    let mut compat = Vec::new();
    for i in 0..leaves.len() {
        for j in i + 1..leaves.len() {
            let mut entries = BTreeMap::new();
            for x in &leaves[i].alternatives {
                for y in &leaves[j].alternatives {
                    entries.insert((x.id.clone(), y.id.clone()), level.next().unwrap());
                }
            }
            compat.push(CompatibilityTable {
                leaf_a: leaves[i].id.clone(),
                leaf_b: leaves[j].id.clone(),
                entries,
            });
        }
    }
    SystemModel {
        id: "single".into(),
        name: String::new(),
        config: ModelConfig::default(),
        criteria: vec![criterion("C1", Orientation::Maximize, 0, 5)],
        root: Part::Composite(CompositePart {
            id: "N".into(),
            label: String::new(),
            weights: Some(vec![1.0]),
            children: leaves.into_iter().map(Part::Leaf).collect(),
        }),
        compat,
    }
}

fn pair_cells(sizes: &[usize]) -> usize {
    let mut cells = 0;
    for i in 0..sizes.len() {
        for j in i + 1..sizes.len() {
            cells += sizes[i] * sizes[j];
        }
    }
    cells
}

/// Single-level node: 2..=4 parts, 1..=5 alternatives each.
pub fn single_level_node() -> impl Strategy<Value = SystemModel> {
    vec(1usize..=5, 2..=4)
        .prop_flat_map(|sizes| {
            let alts: usize = sizes.iter().sum();
            let cells = pair_cells(&sizes);
            (Just(sizes), vec(1u32..=3, alts), vec(compat_level(), cells))
        })
        .prop_map(|(sizes, prios, levels)| single_level(&sizes, &prios, &levels))
}

const STRING_POOL: &[char] = &[
    'a', 'b', 'z', 'X', ' ', '0', '9', '_', '-', '"', '\\', '\n', '\t', 'é', '漢', '🙂', '{', ';',
    '=',
];

fn random_text(rng: &mut StdRng) -> String {
    let len = rng.random_range(0..8);
    (0..len)
        .map(|_| STRING_POOL[rng.random_range(0..STRING_POOL.len())])
        .collect()
}

struct Gen<'r> {
    rng: &'r mut StdRng,
    parts: usize,
    alts: usize,
    criteria: Vec<Criterion>,
    k: u32,
}

impl Gen<'_> {
    fn part(&mut self, depth: usize, max_depth: usize) -> Part {
        let leaf = depth > 0 && (depth == max_depth || self.rng.random_bool(0.4));
        let id = format!("p{}", self.parts);
        self.parts += 1;
        let label = random_text(self.rng);
        if leaf {
            let n = self.rng.random_range(1..=4);
            let alternatives = (0..n)
                .map(|_| {
                    let id = format!("a{}", self.alts);
                    self.alts += 1;
                    let estimates = self
                        .criteria
                        .iter()
                        .map(|c| self.rng.random_range(c.scale_lo..=c.scale_hi))
                        .collect();
                    let given_priority = self
                        .rng
                        .random_bool(0.7)
                        .then(|| self.rng.random_range(1..=self.k));
                    Alternative {
                        id,
                        label: random_text(self.rng),
                        estimates,
                        given_priority,
                    }
                })
                .collect();
            Part::Leaf(LeafPart {
                id,
                label,
                alternatives,
            })
        } else {
            let weights = (depth == 0 || self.rng.random_bool(0.5)).then(|| {
                let mut w: Vec<f64> = (0..self.criteria.len())
                    .map(|_| self.rng.random_range(0.0..10.0))
                    .collect();
                w[0] = w[0].max(0.5);
                w
            });
            let n = self.rng.random_range(2..=3);
            let children = (0..n).map(|_| self.part(depth + 1, max_depth)).collect();
            Part::Composite(CompositePart {
                id,
                label,
                weights,
                children,
            })
        }
    }
}

/// Arbitrary valid model: up to three levels, random labels (including
/// characters that need escaping), partial priorities, sparse tables.
pub fn random_model(seed: u64) -> SystemModel {
    let mut rng = StdRng::seed_from_u64(seed);
    let k = rng.random_range(1..=4);
    let l = rng.random_range(1..=4);
    let criteria: Vec<Criterion> = (0..rng.random_range(1..=4))
        .map(|i| {
            let lo = rng.random_range(-5..=5);
            let hi = lo + rng.random_range(1..=6);
            let orientation = if rng.random_bool(0.5) {
                Orientation::Maximize
            } else {
                Orientation::Minimize
            };
            Criterion {
                label: random_text(&mut rng),
                ..criterion(&format!("C{i}"), orientation, lo, hi)
            }
        })
        .collect();
    let config = ModelConfig {
        k,
        l,
        default_compat: rng.random_range(0..=l),
        concordance_p: rng.random_range(0.51..=1.0),
        discordance_q: rng.random_range(0.0..0.99),
    };
    let max_depth = rng.random_range(1..=3);
    let (root, rng) = {
        let mut g = Gen {
            rng: &mut rng,
            parts: 0,
            alts: 0,
            criteria: criteria.clone(),
            k,
        };
        (g.part(0, max_depth), g.rng)
    };
    let leaves: Vec<LeafPart> = root.leaves().into_iter().cloned().collect();
    let mut compat = Vec::new();
    for i in 0..leaves.len() {
        for j in i + 1..leaves.len() {
            if !rng.random_bool(0.3) {
                continue;
            }
            let entries = leaves[i]
                .alternatives
                .iter()
                .flat_map(|x| {
                    leaves[j]
                        .alternatives
                        .iter()
                        .map(move |y| (x.id.clone(), y.id.clone()))
                })
                .map(|key| (key, rng.random_range(0..=l)))
                .collect();
            compat.push(CompatibilityTable {
                leaf_a: leaves[i].id.clone(),
                leaf_b: leaves[j].id.clone(),
                entries,
            });
        }
    }
    SystemModel {
        id: format!("m{seed}"),
        name: random_text(rng),
        config,
        criteria,
        root,
        compat,
    }
}

/// Hierarchical model for composition checks: full priorities, tables
/// between every pair of leaves at levels 1..=3 so every node is feasible
/// except where `zeros` punches holes.
pub fn random_hierarchy(seed: u64, zeros: f64) -> SystemModel {
    let mut rng = StdRng::seed_from_u64(seed);
    let criteria = vec![criterion("C1", Orientation::Maximize, 0, 5)];
    let max_depth = rng.random_range(2..=3);
    let (mut root, rng) = {
        let mut g = Gen {
            rng: &mut rng,
            parts: 0,
            alts: 0,
            criteria: criteria.clone(),
            k: 3,
        };
        (g.part(0, max_depth), g.rng)
    };
    fill_priorities(&mut root, rng);
    let leaves: Vec<LeafPart> = root.leaves().into_iter().cloned().collect();
    let mut compat = Vec::new();
    for i in 0..leaves.len() {
        for j in i + 1..leaves.len() {
            let entries = leaves[i]
                .alternatives
                .iter()
                .flat_map(|x| {
                    leaves[j]
                        .alternatives
                        .iter()
                        .map(move |y| (x.id.clone(), y.id.clone()))
                })
                .map(|key| {
                    let level = if rng.random_bool(zeros) {
                        0
                    } else {
                        rng.random_range(1..=3)
                    };
                    (key, level)
                })
                .collect();
            compat.push(CompatibilityTable {
                leaf_a: leaves[i].id.clone(),
                leaf_b: leaves[j].id.clone(),
                entries,
            });
        }
    }
    SystemModel {
        id: format!("h{seed}"),
        name: String::new(),
        config: ModelConfig::default(),
        criteria,
        root,
        compat,
    }
}

fn fill_priorities(part: &mut Part, rng: &mut StdRng) {
    match part {
        Part::Leaf(l) => {
            for a in &mut l.alternatives {
                a.given_priority = Some(rng.random_range(1..=3));
            }
        }
        Part::Composite(c) => {
            for child in &mut c.children {
                fill_priorities(child, rng);
            }
        }
    }
}

/// Reference dominance straight from the definition: `w1 >= w2` and every
/// prefix sum of `n1` at least that of `n2`, with one strict.
pub fn reference_dominates(w1: u32, n1: &[u32], w2: u32, n2: &[u32]) -> bool {
    let mut ge = w1 >= w2;
    let mut strict = w1 > w2;
    let (mut s1, mut s2) = (0u32, 0u32);
    for (a, b) in n1.iter().zip(n2) {
        s1 += a;
        s2 += b;
        ge &= s1 >= s2;
        strict |= s1 > s2;
    }
    ge && strict
}

/// Quality of a flat tuple of alternatives (one per leaf): minimum of the
/// pairwise levels (uncovered pairs take `default_compat`) and the priority
/// histogram. None when some pair is incompatible.
pub fn reference_quality(
    model: &SystemModel,
    tuple: &[(&str, &str)],
    priority: &HashMap<String, u32>,
) -> Option<(u32, Vec<u32>)> {
    let mut w = model.config.l;
    for i in 0..tuple.len() {
        for j in i + 1..tuple.len() {
            let (la, a) = tuple[i];
            let (lb, b) = tuple[j];
            let level = model
                .compat
                .iter()
                .find_map(|t| {
                    if t.leaf_a == la && t.leaf_b == lb {
                        t.entries.get(&(a.to_string(), b.to_string())).copied()
                    } else if t.leaf_a == lb && t.leaf_b == la {
                        t.entries.get(&(b.to_string(), a.to_string())).copied()
                    } else {
                        None
                    }
                })
                .unwrap_or(model.config.default_compat);
            w = w.min(level);
        }
    }
    if w == 0 {
        return None;
    }
    let k = model.config.k as usize;
    let mut n = vec![0u32; k];
    for (_, a) in tuple {
        n[priority[*a].min(k as u32) as usize - 1] += 1;
    }
    Some((w, n))
}

/// Every feasible flat tuple under `node` with its quality, and the
/// distinct qualities of the non-dominated ones.
pub type Quality = (u32, Vec<u32>);

pub fn reference_frontier(
    model: &SystemModel,
    node: &str,
) -> (Vec<(String, Quality)>, Vec<Quality>) {
    let priority: HashMap<String, u32> = model
        .leaves()
        .iter()
        .flat_map(|l| l.alternatives.iter())
        .map(|a| {
            (
                a.id.clone(),
                a.given_priority
                    .expect("reference oracle needs given priorities"),
            )
        })
        .collect();
    let leaves = model.find_part(node).unwrap().leaves();
    let mut tuples: Vec<Vec<(&str, &str)>> = vec![Vec::new()];
    for leaf in &leaves {
        tuples = tuples
            .into_iter()
            .flat_map(|t| {
                leaf.alternatives.iter().map(move |a| {
                    let mut t = t.clone();
                    t.push((leaf.id.as_str(), a.id.as_str()));
                    t
                })
            })
            .collect();
    }
    let feasible: Vec<(String, Quality)> = tuples
        .iter()
        .filter_map(|t| {
            reference_quality(model, t, &priority)
                .map(|q| (t.iter().map(|(_, a)| *a).collect::<Vec<_>>().join("*"), q))
        })
        .collect();
    let mut frontier: Vec<Quality> = feasible
        .iter()
        .filter(|(_, (w, n))| {
            !feasible
                .iter()
                .any(|(_, (w2, n2))| reference_dominates(*w2, n2, *w, n))
        })
        .map(|(_, q)| q.clone())
        .collect();
    frontier.sort();
    frontier.dedup();
    (feasible, frontier)
}

pub struct RankingInstance {
    pub criteria: Vec<Criterion>,
    pub leaf: LeafPart,
    pub weights: WeightAssignment,
    pub params: RankingParams,
}

pub fn ranking_instance(seed: u64) -> RankingInstance {
    let mut rng = StdRng::seed_from_u64(seed);
    let criteria: Vec<Criterion> = (0..rng.random_range(1..=4))
        .map(|i| {
            let lo = rng.random_range(-3..=3);
            let hi = lo + rng.random_range(1..=6);
            let o = if rng.random_bool(0.5) {
                Orientation::Maximize
            } else {
                Orientation::Minimize
            };
            criterion(&format!("C{i}"), o, lo, hi)
        })
        .collect();
    let alternatives = (0..rng.random_range(1..=7))
        .map(|j| {
            let est = criteria
                .iter()
                .map(|c| rng.random_range(c.scale_lo..=c.scale_hi))
                .collect();
            alternative(&format!("x{j}"), est, None)
        })
        .collect();
    let mut magnitudes: Vec<f64> = criteria
        .iter()
        .map(|_| rng.random_range(0..=10) as f64)
        .collect();
    magnitudes[0] = magnitudes[0].max(1.0);
    let params =
        RankingParams::new(rng.random_range(0.51..=1.0), rng.random_range(0.0..0.99)).unwrap();
    RankingInstance {
        criteria,
        leaf: LeafPart {
            id: "X".into(),
            label: String::new(),
            alternatives,
        },
        weights: WeightAssignment {
            part_id: "W".into(),
            magnitudes,
        },
        params,
    }
}

fn weakly_dominates(a: &Alternative, b: &Alternative, criteria: &[Criterion]) -> bool {
    criteria
        .iter()
        .enumerate()
        .all(|(i, c)| oriented_value(a, i, c) >= oriented_value(b, i, c))
}

/// Layer partition, dominance consistency, weight scaling, duplicate
/// insertion and order independence for one ranked leaf.
pub fn check_ranking_properties(inst: &RankingInstance, scale: f64) -> Result<(), String> {
    let part =
        rank(&inst.leaf, &inst.weights, &inst.criteria, inst.params).map_err(|e| e.to_string())?;
    let alts = &inst.leaf.alternatives;

    let mut seen: Vec<&str> = part.layers.iter().flatten().map(String::as_str).collect();
    seen.sort();
    let mut ids: Vec<&str> = alts.iter().map(|a| a.id.as_str()).collect();
    ids.sort();
    if seen != ids {
        return Err(format!(
            "layers {:?} do not partition {:?}",
            part.layers, ids
        ));
    }
    for (i, layer) in part.layers.iter().enumerate() {
        if layer.is_empty() {
            return Err(format!("layer {} is empty", i + 1));
        }
        for id in layer {
            if part.priority_of[id] != i as u32 + 1 {
                return Err(format!(
                    "{id} listed in layer {} but priority {}",
                    i + 1,
                    part.priority_of[id]
                ));
            }
        }
    }

    for a in alts {
        for b in alts {
            if weakly_dominates(a, b, &inst.criteria)
                && part.priority_of[&a.id] > part.priority_of[&b.id]
            {
                return Err(format!("{} dominates {} but ranks below it", a.id, b.id));
            }
        }
    }

    let scaled = WeightAssignment {
        part_id: inst.weights.part_id.clone(),
        magnitudes: inst.weights.magnitudes.iter().map(|w| w * scale).collect(),
    };
    let again =
        rank(&inst.leaf, &scaled, &inst.criteria, inst.params).map_err(|e| e.to_string())?;
    if again != part {
        return Err(format!("scaling weights by {scale} changed the layers"));
    }

    let mut reversed = inst.leaf.clone();
    reversed.alternatives.reverse();
    let rev =
        rank(&reversed, &inst.weights, &inst.criteria, inst.params).map_err(|e| e.to_string())?;
    if rev.priority_of != part.priority_of {
        return Err("input order changed the priorities".into());
    }

    if let Some(src) = alts.first() {
        let mut dup = inst.leaf.clone();
        dup.alternatives.push(Alternative {
            id: format!("{}_copy", src.id),
            ..src.clone()
        });
        let with_copy =
            rank(&dup, &inst.weights, &inst.criteria, inst.params).map_err(|e| e.to_string())?;
        for a in alts {
            if with_copy.priority_of[&a.id] != part.priority_of[&a.id] {
                return Err(format!("duplicating {} moved {}", src.id, a.id));
            }
        }
        if with_copy.priority_of[&format!("{}_copy", src.id)] != part.priority_of[&src.id] {
            return Err("duplicate landed in a different layer".into());
        }
    }
    Ok(())
}

/// Picks a random feasible decision of node `N` and checks that every
/// single proposed action leaves it equal or better. Returns false when the
/// node is infeasible and nothing was checked.
pub fn check_whatif_monotone(model: &SystemModel, seed: u64) -> Result<bool, String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let opts = SolveOptions::default();
    let c = Composer::new(model, opts.clone()).map_err(|e| e.to_string())?;
    let node = model.root.as_composite().unwrap();
    let children = node
        .children
        .iter()
        .map(|ch| Ok((ch.id().to_string(), c.candidates(ch)?)))
        .collect::<Result<Vec<_>, morphdes::CompositionError>>()
        .map_err(|e| e.to_string())?;
    let feasible = c
        .feasible_combinations(&node.id, &children)
        .map_err(|e| e.to_string())?;
    if feasible.is_empty() {
        return Ok(false);
    }
    let decision = &feasible[rng.random_range(0..feasible.len())];
    for action in propose_actions(decision, &c).map_err(|e| e.to_string())? {
        let report = evaluate_actions(decision, &[action.spec()], model, &opts)
            .map_err(|e| e.to_string())?;
        if !matches!(
            report.dominance_delta,
            DominanceResult::FirstDominates | DominanceResult::Equal
        ) {
            return Err(format!(
                "{action} took {} from {} to {} ({})",
                decision.key(),
                report.quality_before,
                report.quality_after,
                report.dominance_delta.as_str()
            ));
        }
    }
    Ok(true)
}

/// DSL and JSON round trips of a generated model.
pub fn check_round_trip(model: &SystemModel) -> Result<(), String> {
    let diags = validate(model);
    if !diags.is_empty() {
        return Err(format!("generator produced an invalid model: {diags:?}"));
    }
    let text = serialize(model);
    let parsed = parse(&text).map_err(|d| format!("reparse failed: {d:?}\n{text}"))?;
    if &parsed != model {
        return Err(format!("DSL round trip changed the model\n{text}"));
    }
    if serialize(&parsed) != text {
        return Err("serializer is not idempotent".into());
    }
    let doc = json::model_to_json(model);
    let back = json::model_from_json(&doc).map_err(|e| e.to_string())?;
    if &back != model {
        return Err(format!("JSON round trip changed the model\n{doc}"));
    }
    Ok(())
}

fn compositions(m: u32, k: usize) -> Vec<Vec<u32>> {
    if k == 1 {
        return vec![vec![m]];
    }
    (0..=m)
        .flat_map(|first| {
            compositions(m - first, k - 1)
                .into_iter()
                .map(move |mut rest| {
                    rest.insert(0, first);
                    rest
                })
        })
        .collect()
}

/// Every quality vector with 1..=4 members, k, l in 1..=3: `dominates`
/// agrees with the definition and is irreflexive, antisymmetric and
/// transitive. Returns the number of ordered pairs compared.
pub fn check_dominance_exhaustive() -> Result<usize, String> {
    let mut checked = 0usize;
    for l in 1..=3u32 {
        for k in 1..=3usize {
            let mut all = Vec::new();
            for m in 1..=4 {
                for n in compositions(m, k) {
                    for w in 0..=l {
                        all.push(QualityVector::new(w, n.clone()));
                    }
                }
            }
            let dom = |a: &QualityVector, b: &QualityVector| {
                matches!(dominates(a, b), Ok(DominanceResult::FirstDominates))
            };
            for a in &all {
                if dom(a, a) {
                    return Err(format!("{a} dominates itself"));
                }
                for b in &all {
                    let got = dominates(a, b).map_err(|e| e.to_string())?;
                    let expected = if a == b {
                        DominanceResult::Equal
                    } else if reference_dominates(a.w, &a.n, b.w, &b.n) {
                        DominanceResult::FirstDominates
                    } else if reference_dominates(b.w, &b.n, a.w, &a.n) {
                        DominanceResult::SecondDominates
                    } else {
                        DominanceResult::Incomparable
                    };
                    if got != expected {
                        return Err(format!(
                            "{a} vs {b}: {} expected {}",
                            got.as_str(),
                            expected.as_str()
                        ));
                    }
                    if dom(a, b) {
                        if dom(b, a) {
                            return Err(format!("{a} and {b} dominate each other"));
                        }
                        if let Some(c) = all.iter().find(|c| dom(b, c) && !dom(a, c)) {
                            return Err(format!("not transitive: {a} > {b} > {c}"));
                        }
                    }
                    checked += 1;
                }
            }
        }
    }
    Ok(checked)
}
