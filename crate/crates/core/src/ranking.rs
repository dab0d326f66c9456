//! Outranking-based priority assignment.
//!
//! Alternatives of a leaf are compared pairwise with a crisp
//! concordance/discordance test. The resulting relation is condensed into
//! strongly connected components and peeled into layers; the layer index
//! is the alternative's priority (1 = best).

use std::collections::{BTreeMap, HashMap};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;
use thiserror::Error;

use crate::model::{
    oriented_value, Alternative, Criterion, LeafPart, SystemModel, WeightAssignment,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RankingError {
    #[error("weights of part {part} are all zero")]
    UndefinedWeights { part: String },
    #[error("leaf {leaf} has no governing weights")]
    NoWeights { leaf: String },
    #[error("ranking parameters out of range: p = {p}, q = {q}")]
    InvalidParams { p: f64, q: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankingParams {
    pub concordance_p: f64,
    pub discordance_q: f64,
}

impl Default for RankingParams {
    fn default() -> Self {
        RankingParams {
            concordance_p: 0.65,
            discordance_q: 0.35,
        }
    }
}

impl RankingParams {
    pub fn new(concordance_p: f64, discordance_q: f64) -> Result<Self, RankingError> {
        let ok = concordance_p > 0.5 && concordance_p <= 1.0 && (0.0..1.0).contains(&discordance_q);
        if !ok {
            return Err(RankingError::InvalidParams {
                p: concordance_p,
                q: discordance_q,
            });
        }
        Ok(RankingParams {
            concordance_p,
            discordance_q,
        })
    }

    pub fn from_model(model: &SystemModel) -> Self {
        RankingParams {
            concordance_p: model.config.concordance_p,
            discordance_q: model.config.discordance_q,
        }
    }
}

/// Weighted share of criteria on which `a` is at least as good as `b`.
pub fn concordance(
    a: &Alternative,
    b: &Alternative,
    weights: &WeightAssignment,
    criteria: &[Criterion],
) -> Result<f64, RankingError> {
    let total: f64 = weights.magnitudes.iter().sum();
    if total <= 0.0 {
        return Err(RankingError::UndefinedWeights {
            part: weights.part_id.clone(),
        });
    }
    let agree: f64 = criteria
        .iter()
        .enumerate()
        .filter(|(i, c)| oriented_value(a, *i, c) >= oriented_value(b, *i, c))
        .map(|(i, _)| weights.magnitudes[i])
        .sum();
    Ok(agree / total)
}

/// Largest scale-normalised margin by which `b` beats `a` on one criterion.
pub fn discordance(a: &Alternative, b: &Alternative, criteria: &[Criterion]) -> f64 {
    criteria
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let gap = (oriented_value(b, i, c) - oriented_value(a, i, c)).max(0);
            gap as f64 / c.width() as f64
        })
        .fold(0.0, f64::max)
}

/// Crisp outranking relation over a list of items; `holds(i, j)` means item
/// `i` outranks item `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutrankingRelation {
    pub items: Vec<String>,
    matrix: Vec<Vec<bool>>,
}

impl OutrankingRelation {
    pub fn from_matrix(items: Vec<String>, matrix: Vec<Vec<bool>>) -> Self {
        assert_eq!(items.len(), matrix.len());
        OutrankingRelation { items, matrix }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn holds(&self, i: usize, j: usize) -> bool {
        self.matrix[i][j]
    }
}

/// Slack on threshold tests so that ratios equal to a threshold compare
/// the same way after rescaling the weights.
const THRESHOLD_EPS: f64 = 1e-9;

pub fn outranking_relation(
    items: &[Alternative],
    weights: &WeightAssignment,
    criteria: &[Criterion],
    params: RankingParams,
) -> Result<OutrankingRelation, RankingError> {
    let n = items.len();
    let mut matrix = vec![vec![false; n]; n];
    for (i, a) in items.iter().enumerate() {
        for (j, b) in items.iter().enumerate() {
            let c = concordance(a, b, weights, criteria)?;
            let d = discordance(a, b, criteria);
            matrix[i][j] = c + THRESHOLD_EPS >= params.concordance_p
                && d <= params.discordance_q + THRESHOLD_EPS;
        }
    }
    Ok(OutrankingRelation {
        items: items.iter().map(|a| a.id.clone()).collect(),
        matrix,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerPartition {
    pub layers: Vec<Vec<String>>,
    pub priority_of: BTreeMap<String, u32>,
}

/// Peels the condensed relation: each round takes every component with no
/// incoming edge from the components still remaining.
pub fn layer_partition(relation: &OutrankingRelation) -> LayerPartition {
    let n = relation.len();
    let mut graph = DiGraph::<usize, ()>::with_capacity(n, n * n);
    let nodes: Vec<_> = (0..n).map(|i| graph.add_node(i)).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j && relation.holds(i, j) {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut component = vec![0usize; n];
    let sccs = tarjan_scc(&graph);
    for (ci, scc) in sccs.iter().enumerate() {
        for node in scc {
            component[graph[*node]] = ci;
        }
    }
    let c = sccs.len();
    let mut preds = vec![vec![false; c]; c];
    for i in 0..n {
        for j in 0..n {
            if relation.holds(i, j) && component[i] != component[j] {
                preds[component[j]][component[i]] = true;
            }
        }
    }

    let mut layer_of_component = vec![0u32; c];
    let mut remaining: Vec<usize> = (0..c).collect();
    let mut layer = 0u32;
    while !remaining.is_empty() {
        layer += 1;
        let (top, rest): (Vec<usize>, Vec<usize>) = remaining
            .iter()
            .partition(|&&x| !remaining.iter().any(|&y| preds[x][y]));
        // condensation is acyclic, so some component is always free
        debug_assert!(!top.is_empty());
        for x in &top {
            layer_of_component[*x] = layer;
        }
        remaining = rest;
    }

    let mut layers = vec![Vec::new(); layer as usize];
    let mut priority_of = BTreeMap::new();
    for (i, id) in relation.items.iter().enumerate() {
        let p = layer_of_component[component[i]];
        layers[(p - 1) as usize].push(id.clone());
        priority_of.insert(id.clone(), p);
    }
    LayerPartition {
        layers,
        priority_of,
    }
}

/// Computed priority for every alternative of the leaf.
pub fn rank(
    leaf: &LeafPart,
    weights: &WeightAssignment,
    criteria: &[Criterion],
    params: RankingParams,
) -> Result<LayerPartition, RankingError> {
    let relation = outranking_relation(&leaf.alternatives, weights, criteria, params)?;
    Ok(layer_partition(&relation))
}

/// Priority of every alternative in the model. Given priorities win unless
/// `recompute` is set; computed layers beyond `k` are clamped to `k`.
pub fn resolve_priorities(
    model: &SystemModel,
    params: RankingParams,
    recompute: bool,
) -> Result<HashMap<String, u32>, RankingError> {
    let weights = model.leaf_weights();
    let k = model.config.k;
    let mut out = HashMap::new();
    for leaf in model.leaves() {
        let needs_ranking =
            recompute || leaf.alternatives.iter().any(|a| a.given_priority.is_none());
        let computed = if needs_ranking {
            let w = weights
                .get(&leaf.id)
                .ok_or_else(|| RankingError::NoWeights {
                    leaf: leaf.id.clone(),
                })?;
            Some(rank(leaf, w, &model.criteria, params)?)
        } else {
            None
        };
        for a in &leaf.alternatives {
            let p = match (recompute, a.given_priority, &computed) {
                (false, Some(p), _) => p,
                (_, _, Some(part)) => part.priority_of[&a.id].min(k),
                (true, _, None) | (false, None, None) => unreachable!("ranking ran"),
            };
            out.insert(a.id.clone(), p);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankRow {
    pub alternative: String,
    pub given: Option<u32>,
    pub computed: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeafAgreement {
    pub leaf: String,
    pub weights_from: String,
    pub layers: Vec<Vec<String>>,
    pub rows: Vec<RankRow>,
    /// Alternatives whose computed priority equals the given one.
    pub exact_matches: usize,
    /// Alternatives that carry a given priority.
    pub compared: usize,
    /// Pairs strictly ordered by the given priorities whose computed order
    /// agrees (same strict direction).
    pub concordant_pairs: usize,
    /// Pairs strictly ordered by the given priorities whose computed order
    /// is reversed.
    pub reversed_pairs: usize,
    /// Pairs strictly ordered by the given priorities that the computed
    /// layering ties.
    pub tied_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub params: RankingParams,
    pub leaves: Vec<LeafAgreement>,
    pub exact_matches: usize,
    pub compared: usize,
    pub concordant_pairs: usize,
    pub reversed_pairs: usize,
    pub tied_pairs: usize,
}

impl AgreementReport {
    pub fn exact_ratio(&self) -> f64 {
        if self.compared == 0 {
            1.0
        } else {
            self.exact_matches as f64 / self.compared as f64
        }
    }
}

/// Ranks every leaf from scratch and compares against the given priorities.
pub fn agreement_report(
    model: &SystemModel,
    params: RankingParams,
) -> Result<AgreementReport, RankingError> {
    let weights = model.leaf_weights();
    let k = model.config.k;
    let mut leaves = Vec::new();
    for leaf in model.leaves() {
        let w = weights
            .get(&leaf.id)
            .ok_or_else(|| RankingError::NoWeights {
                leaf: leaf.id.clone(),
            })?;
        let part = rank(leaf, w, &model.criteria, params)?;
        let rows: Vec<RankRow> = leaf
            .alternatives
            .iter()
            .map(|a| RankRow {
                alternative: a.id.clone(),
                given: a.given_priority,
                computed: part.priority_of[&a.id].min(k),
            })
            .collect();
        let mut agg = LeafAgreement {
            leaf: leaf.id.clone(),
            weights_from: w.part_id.clone(),
            layers: part.layers.clone(),
            exact_matches: rows.iter().filter(|r| r.given == Some(r.computed)).count(),
            compared: rows.iter().filter(|r| r.given.is_some()).count(),
            concordant_pairs: 0,
            reversed_pairs: 0,
            tied_pairs: 0,
            rows,
        };
        for (i, a) in agg.rows.iter().enumerate() {
            for b in &agg.rows[i + 1..] {
                let (Some(ga), Some(gb)) = (a.given, b.given) else {
                    continue;
                };
                if ga == gb {
                    continue;
                }
                let given_order = ga.cmp(&gb);
                let computed_order = a.computed.cmp(&b.computed);
                if computed_order == given_order {
                    agg.concordant_pairs += 1;
                } else if computed_order.is_eq() {
                    agg.tied_pairs += 1;
                } else {
                    agg.reversed_pairs += 1;
                }
            }
        }
        leaves.push(agg);
    }
    let sum = |f: fn(&LeafAgreement) -> usize| leaves.iter().map(f).sum();
    Ok(AgreementReport {
        params,
        exact_matches: sum(|l| l.exact_matches),
        compared: sum(|l| l.compared),
        concordant_pairs: sum(|l| l.concordant_pairs),
        reversed_pairs: sum(|l| l.reversed_pairs),
        tied_pairs: sum(|l| l.tied_pairs),
        leaves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn d_weights() -> WeightAssignment {
        WeightAssignment {
            part_id: "D".into(),
            magnitudes: vec![2.0, 1.0, 2.0, 3.0],
        }
    }

    fn alts(model: &SystemModel, ids: &[&str]) -> Vec<Alternative> {
        ids.iter()
            .map(|id| model.alternative(id).unwrap().clone())
            .collect()
    }

    #[test]
    fn concordance_examples() {
        let m = fixtures::smart_home();
        let g = alts(&m, &["G1", "G2"]);
        assert_eq!(
            concordance(&g[0], &g[0], &d_weights(), &m.criteria).unwrap(),
            1.0
        );
        assert_eq!(
            concordance(&g[0], &g[1], &d_weights(), &m.criteria).unwrap(),
            1.0
        );
        assert_eq!(
            concordance(&g[1], &g[0], &d_weights(), &m.criteria).unwrap(),
            0.25
        );
    }

    #[test]
    fn zero_weights_are_rejected() {
        let m = fixtures::smart_home();
        let g = alts(&m, &["G1", "G2"]);
        let w = WeightAssignment {
            part_id: "D".into(),
            magnitudes: vec![0.0; 4],
        };
        assert_eq!(
            concordance(&g[0], &g[1], &w, &m.criteria),
            Err(RankingError::UndefinedWeights { part: "D".into() })
        );
    }

    #[test]
    fn discordance_examples() {
        let m = fixtures::smart_home();
        let g = alts(&m, &["G1", "G2"]);
        assert_eq!(discordance(&g[0], &g[0], &m.criteria), 0.0);
        assert_eq!(discordance(&g[0], &g[1], &m.criteria), 0.0);
        assert_eq!(discordance(&g[1], &g[0], &m.criteria), 0.4);
    }

    #[test]
    fn relation_examples() {
        let m = fixtures::smart_home();
        let g = alts(&m, &["G1", "G2"]);
        let rel = outranking_relation(
            &g,
            &d_weights(),
            &m.criteria,
            RankingParams::new(0.65, 0.4).unwrap(),
        )
        .unwrap();
        assert!(rel.holds(0, 1));
        assert!(!rel.holds(1, 0));

        let twins = vec![
            g[0].clone(),
            Alternative {
                id: "G1b".into(),
                ..g[0].clone()
            },
        ];
        let rel = outranking_relation(&twins, &d_weights(), &m.criteria, RankingParams::default())
            .unwrap();
        assert!(rel.holds(0, 1) && rel.holds(1, 0));

        let rel = outranking_relation(&g[..1], &d_weights(), &m.criteria, RankingParams::default())
            .unwrap();
        assert_eq!(layer_partition(&rel).layers, vec![vec!["G1".to_string()]]);
    }

    fn rel(n: usize, edges: &[(usize, usize)]) -> OutrankingRelation {
        let mut m = vec![vec![false; n]; n];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = true;
        }
        for &(a, b) in edges {
            m[a][b] = true;
        }
        OutrankingRelation::from_matrix(
            ["a", "b", "c", "d"][..n]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            m,
        )
    }

    #[test]
    fn partition_examples() {
        let empty = layer_partition(&rel(4, &[]));
        assert_eq!(empty.layers.len(), 1);
        assert_eq!(empty.layers[0].len(), 4);

        let chain = layer_partition(&rel(3, &[(0, 1), (1, 2)]));
        assert_eq!(chain.layers, vec![vec!["a"], vec!["b"], vec!["c"]]);

        let mutual = layer_partition(&rel(3, &[(0, 1), (1, 0), (0, 2), (1, 2)]));
        assert_eq!(mutual.layers, vec![vec!["a", "b"], vec!["c"]]);
        assert_eq!(mutual.priority_of["c"], 2);
    }

    #[test]
    fn cycle_collapses_into_one_layer() {
        let p = layer_partition(&rel(4, &[(0, 1), (1, 2), (2, 0), (2, 3)]));
        assert_eq!(p.layers, vec![vec!["a", "b", "c"], vec!["d"]]);
    }

    #[test]
    fn rank_leaf_g() {
        let m = fixtures::smart_home();
        let g = m.find_part("G").unwrap().as_leaf().unwrap();
        let p = rank(g, &d_weights(), &m.criteria, RankingParams::default()).unwrap();
        assert!(p.priority_of["G1"] < p.priority_of["G2"]);
    }

    #[test]
    fn single_and_duplicate_alternatives() {
        let m = fixtures::smart_home();
        let mut g = m.find_part("G").unwrap().as_leaf().unwrap().clone();
        g.alternatives.truncate(1);
        let p = rank(&g, &d_weights(), &m.criteria, RankingParams::default()).unwrap();
        assert_eq!(p.priority_of["G1"], 1);

        let dup = Alternative {
            id: "G1b".into(),
            ..g.alternatives[0].clone()
        };
        g.alternatives.push(dup);
        let p = rank(&g, &d_weights(), &m.criteria, RankingParams::default()).unwrap();
        assert_eq!(p.priority_of["G1"], p.priority_of["G1b"]);
    }

    #[test]
    fn given_priorities_win_unless_recomputed() {
        let m = fixtures::smart_home();
        let given = resolve_priorities(&m, RankingParams::default(), false).unwrap();
        assert_eq!(given["J2"], 3);
        assert_eq!(given["L3"], 1);
        let computed = resolve_priorities(&m, RankingParams::default(), true).unwrap();
        assert_eq!(computed.len(), 41);
        assert!(computed.values().all(|p| (1..=3).contains(p)));
    }

    #[test]
    fn agreement_report_counts() {
        let m = fixtures::smart_home();
        let r = agreement_report(&m, RankingParams::default()).unwrap();
        assert_eq!(r.leaves.len(), 16);
        assert_eq!(r.compared, 41);
        assert!(r.exact_matches <= r.compared);
    }
}
