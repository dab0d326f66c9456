//! Bottleneck detection and what-if improvement actions.
//!
//! Two kinds of action improve a composite decision: raising the priority
//! of a member alternative, or raising the compatibility of a pair of
//! alternatives. Actions are evaluated on a derived copy of the model;
//! the input model is never touched.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::composition::{
    dominates, Composer, CompositeDecision, CompositionError, DominanceResult, Pick, QualityVector,
    SolveOptions,
};
use crate::model::{CompatibilityTable, SystemModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImprovementError {
    #[error("unknown alternative {0}")]
    NotFound(String),
    #[error("malformed action `{0}`: expected alt:<ID>=<priority> or ic:<ID>,<ID>=<level>")]
    Syntax(String),
    #[error("action {0} does not improve: {1}")]
    NotAnImprovement(String, String),
    #[error(transparent)]
    Composition(#[from] CompositionError),
}

/// Parsed action text; the current level is filled in by [`resolve_action`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ActionSpec {
    Element { alt: String, to: u32 },
    Compat { a: String, b: String, to: u32 },
}

impl FromStr for ActionSpec {
    type Err = ImprovementError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ImprovementError::Syntax(s.to_string());
        let (target, level) = s.rsplit_once('=').ok_or_else(bad)?;
        let to: u32 = level.trim().parse().map_err(|_| bad())?;
        if let Some(alt) = target.strip_prefix("alt:") {
            let alt = alt.trim();
            if alt.is_empty() || alt.contains(',') {
                return Err(bad());
            }
            Ok(ActionSpec::Element {
                alt: alt.to_string(),
                to,
            })
        } else if let Some(pair) = target.strip_prefix("ic:") {
            let (a, b) = pair.split_once(',').ok_or_else(bad)?;
            let (a, b) = (a.trim(), b.trim());
            if a.is_empty() || b.is_empty() {
                return Err(bad());
            }
            Ok(ActionSpec::Compat {
                a: a.to_string(),
                b: b.to_string(),
                to,
            })
        } else {
            Err(bad())
        }
    }
}

impl fmt::Display for ActionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionSpec::Element { alt, to } => write!(f, "alt:{alt}={to}"),
            ActionSpec::Compat { a, b, to } => write!(f, "ic:{a},{b}={to}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ImprovementAction {
    ElementUpgrade {
        alt: String,
        from_level: u32,
        to_level: u32,
    },
    CompatUpgrade {
        a: String,
        b: String,
        from_level: u32,
        to_level: u32,
    },
}

impl ImprovementAction {
    pub fn spec(&self) -> ActionSpec {
        match self {
            ImprovementAction::ElementUpgrade { alt, to_level, .. } => ActionSpec::Element {
                alt: alt.clone(),
                to: *to_level,
            },
            ImprovementAction::CompatUpgrade { a, b, to_level, .. } => ActionSpec::Compat {
                a: a.clone(),
                b: b.clone(),
                to: *to_level,
            },
        }
    }
}

impl fmt::Display for ImprovementAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImprovementAction::ElementUpgrade {
                alt,
                from_level,
                to_level,
            } => {
                write!(f, "{alt}: {from_level} => {to_level}")
            }
            ImprovementAction::CompatUpgrade {
                a,
                b,
                from_level,
                to_level,
            } => {
                write!(f, "({a},{b}): {from_level} => {to_level}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ElementBottleneck {
    /// Child part holding the member.
    pub part: String,
    /// Alternative id, or the parenthesised selection of a composite member.
    pub member: String,
    pub priority: u32,
    pub is_alternative: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CompatBottleneck {
    pub a: String,
    pub b: String,
    pub level: u32,
}

/// Members with priority worse than 1, worst first, then by member id.
pub fn element_bottlenecks(decision: &CompositeDecision) -> Vec<ElementBottleneck> {
    let mut out: Vec<ElementBottleneck> = decision
        .selection
        .iter()
        .filter(|c| c.pick.priority() > 1)
        .map(|c| ElementBottleneck {
            part: c.part.clone(),
            member: c.pick.key(),
            priority: c.pick.priority(),
            is_alternative: matches!(c.pick, Pick::Alternative { .. }),
        })
        .collect();
    out.sort_by(|x, y| {
        y.priority
            .cmp(&x.priority)
            .then_with(|| x.member.cmp(&y.member))
    });
    out
}

/// Leaf-alternative pairs across distinct members whose compatibility
/// equals `w(S)`; empty when `w(S)` is already the best level.
pub fn compat_bottlenecks(
    decision: &CompositeDecision,
    composer: &Composer<'_>,
) -> Result<Vec<CompatBottleneck>, ImprovementError> {
    let model = composer.model();
    let w = decision.quality.w;
    if w >= model.config.l {
        return Ok(Vec::new());
    }
    let members: Vec<Vec<(&str, &str)>> = decision
        .selection
        .iter()
        .map(|c| match &c.pick {
            Pick::Alternative { id, .. } => vec![(c.part.as_str(), id.as_str())],
            Pick::Composite(d) => d.leaf_members(),
        })
        .collect();
    let mut out = Vec::new();
    for (i, xs) in members.iter().enumerate() {
        for ys in &members[i + 1..] {
            for (lx, ax) in xs {
                for (ly, ay) in ys {
                    let level = composer.lookup().leaf_pair(lx, ax, ly, ay)?;
                    if level == w {
                        out.push(CompatBottleneck {
                            a: ax.to_string(),
                            b: ay.to_string(),
                            level,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

/// One upgrade to priority 1 per alternative bottleneck, then one upgrade
/// to level `l` per compatibility bottleneck.
pub fn propose_actions(
    decision: &CompositeDecision,
    composer: &Composer<'_>,
) -> Result<Vec<ImprovementAction>, ImprovementError> {
    let l = composer.model().config.l;
    let mut out: Vec<ImprovementAction> = element_bottlenecks(decision)
        .into_iter()
        .filter(|b| b.is_alternative)
        .map(|b| ImprovementAction::ElementUpgrade {
            alt: b.member,
            from_level: b.priority,
            to_level: 1,
        })
        .collect();
    out.extend(
        compat_bottlenecks(decision, composer)?
            .into_iter()
            .map(|b| ImprovementAction::CompatUpgrade {
                a: b.a,
                b: b.b,
                from_level: b.level,
                to_level: l,
            }),
    );
    Ok(out)
}

/// Fills in the current level of the action's target.
pub fn resolve_action(
    spec: &ActionSpec,
    composer: &Composer<'_>,
) -> Result<ImprovementAction, ImprovementError> {
    let model = composer.model();
    match spec {
        ActionSpec::Element { alt, to } => {
            if model.alternative(alt).is_none() {
                return Err(ImprovementError::NotFound(alt.clone()));
            }
            let from = composer.priorities()[alt];
            let action = ImprovementAction::ElementUpgrade {
                alt: alt.clone(),
                from_level: from,
                to_level: *to,
            };
            if *to < 1 || *to >= from {
                return Err(ImprovementError::NotAnImprovement(
                    spec.to_string(),
                    format!("priority must move from {from} to a level in 1..{from}"),
                ));
            }
            Ok(action)
        }
        ActionSpec::Compat { a, b, to } => {
            let la = model
                .leaf_of_alternative(a)
                .ok_or_else(|| ImprovementError::NotFound(a.clone()))?;
            let lb = model
                .leaf_of_alternative(b)
                .ok_or_else(|| ImprovementError::NotFound(b.clone()))?;
            if la.id == lb.id {
                return Err(CompositionError::SameLeaf(a.clone(), b.clone()).into());
            }
            let from = composer.lookup().leaf_pair(&la.id, a, &lb.id, b)?;
            let l = model.config.l;
            if *to <= from || *to > l {
                return Err(ImprovementError::NotAnImprovement(
                    spec.to_string(),
                    format!(
                        "compatibility must move from {from} to a level in {}..{l}",
                        from + 1
                    ),
                ));
            }
            Ok(ImprovementAction::CompatUpgrade {
                a: a.clone(),
                b: b.clone(),
                from_level: from,
                to_level: *to,
            })
        }
    }
}

/// Derived model with the action applied.
pub fn apply_action(
    model: &SystemModel,
    action: &ImprovementAction,
) -> Result<SystemModel, ImprovementError> {
    let mut out = model.clone();
    match action {
        ImprovementAction::ElementUpgrade { alt, to_level, .. } => {
            let a = out
                .alternative_mut(alt)
                .ok_or_else(|| ImprovementError::NotFound(alt.clone()))?;
            a.given_priority = Some(*to_level);
        }
        ImprovementAction::CompatUpgrade { a, b, to_level, .. } => {
            let la = model
                .leaf_of_alternative(a)
                .ok_or_else(|| ImprovementError::NotFound(a.clone()))?;
            let lb = model
                .leaf_of_alternative(b)
                .ok_or_else(|| ImprovementError::NotFound(b.clone()))?;
            if la.id == lb.id {
                return Err(CompositionError::SameLeaf(a.clone(), b.clone()).into());
            }
            let idx = match out.compat.iter().position(|t| t.covers(&la.id, &lb.id)) {
                Some(i) => i,
                None => {
                    let default = model.config.default_compat;
                    let mut entries = BTreeMap::new();
                    for x in &la.alternatives {
                        for y in &lb.alternatives {
                            entries.insert((x.id.clone(), y.id.clone()), default);
                        }
                    }
                    out.compat.push(CompatibilityTable {
                        leaf_a: la.id.clone(),
                        leaf_b: lb.id.clone(),
                        entries,
                    });
                    out.compat.len() - 1
                }
            };
            let t = &mut out.compat[idx];
            let key = if t.leaf_a == la.id {
                (a.clone(), b.clone())
            } else {
                (b.clone(), a.clone())
            };
            t.entries.insert(key, *to_level);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierEffect {
    /// Indices into the original frontier of the members (other than the
    /// decision itself) that the modified decision now dominates.
    pub dominates: Vec<usize>,
    /// Whether the modified decision belongs to the recomputed frontier.
    pub on_frontier_after: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WhatIfReport {
    pub node: String,
    pub actions: Vec<ImprovementAction>,
    pub quality_before: QualityVector,
    pub quality_after: QualityVector,
    /// After compared against before.
    pub dominance_delta: DominanceResult,
    pub frontier_effect: FrontierEffect,
    pub decision_after: CompositeDecision,
    pub frontier_after: Vec<CompositeDecision>,
}

/// Applies every action to a derived model and recomputes the decision and
/// its node frontier.
pub fn evaluate_actions(
    decision: &CompositeDecision,
    specs: &[ActionSpec],
    model: &SystemModel,
    options: &SolveOptions,
) -> Result<WhatIfReport, ImprovementError> {
    let before = Composer::new(model, options.clone())?;
    let decision_before = before.recompute(decision)?;
    let frontier_before = before.solve_node(&decision.node)?.frontier;

    let mut edited = model.clone();
    let mut actions = Vec::with_capacity(specs.len());
    for spec in specs {
        let composer = Composer::new(&edited, options.clone())?;
        let action = resolve_action(spec, &composer)?;
        edited = apply_action(&edited, &action)?;
        actions.push(action);
    }

    let after = Composer::new(&edited, options.clone())?;
    let decision_after = after.recompute(decision)?;
    let frontier_after = after.solve_node(&decision.node)?.frontier;
    let key = decision_after.key();

    let dominated = frontier_before
        .iter()
        .enumerate()
        .filter(|(_, d)| d.key() != key)
        .filter(|(_, d)| {
            matches!(
                dominates(&decision_after.quality, &d.quality),
                Ok(DominanceResult::FirstDominates)
            )
        })
        .map(|(i, _)| i)
        .collect();

    Ok(WhatIfReport {
        node: decision.node.clone(),
        actions,
        dominance_delta: dominates(&decision_after.quality, &decision_before.quality)?,
        quality_before: decision_before.quality,
        quality_after: decision_after.quality.clone(),
        frontier_effect: FrontierEffect {
            dominates: dominated,
            on_frontier_after: frontier_after.iter().any(|d| d.key() == key),
        },
        decision_after,
        frontier_after,
    })
}
