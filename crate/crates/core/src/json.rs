//! JSON documents (`schema_version: 1`). The CLI and the HTTP service both
//! render through these functions, so their output is byte-identical.

use std::collections::BTreeMap;

use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::composition::{CompositeDecision, CompositionError, NodeSolution, Pick, QualityVector};
use crate::improvement::{
    CompatBottleneck, ElementBottleneck, ImprovementAction, ImprovementError, WhatIfReport,
};
use crate::model::{Diagnostic, Part, SystemModel};
use crate::modelfile::ParseDiagnostic;
use crate::ranking::{AgreementReport, RankingError, RankingParams};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum JsonError {
    #[error("invalid JSON: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("unsupported schema_version {0}")]
    Version(u64),
    #[error("{0}")]
    Shape(String),
}

/// Decision rendered as `{"w", "n", "selection"}`; nested composite
/// members also carry their effective `priority`.
pub struct DecisionView<'a> {
    decision: &'a CompositeDecision,
    nested: bool,
}

impl<'a> DecisionView<'a> {
    pub fn new(decision: &'a CompositeDecision) -> Self {
        DecisionView {
            decision,
            nested: false,
        }
    }
}

struct SelectionView<'a>(&'a CompositeDecision);

impl Serialize for SelectionView<'_> {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let mut map = ser.serialize_map(Some(self.0.selection.len()))?;
        for c in &self.0.selection {
            match &c.pick {
                Pick::Alternative { id, .. } => map.serialize_entry(&c.part, id)?,
                Pick::Composite(d) => map.serialize_entry(
                    &c.part,
                    &DecisionView {
                        decision: d,
                        nested: true,
                    },
                )?,
            }
        }
        map.end()
    }
}

impl Serialize for DecisionView<'_> {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let d = self.decision;
        let mut map = ser.serialize_map(None)?;
        if self.nested {
            map.serialize_entry("priority", &d.effective_priority)?;
        }
        map.serialize_entry("w", &d.quality.w)?;
        map.serialize_entry("n", &d.quality.n)?;
        map.serialize_entry("selection", &SelectionView(d))?;
        map.end()
    }
}

fn render<T: Serialize>(doc: &T) -> String {
    serde_json::to_string(doc).expect("documents serialize infallibly")
}

#[derive(Serialize, Deserialize)]
struct ModelDoc<M> {
    schema_version: u32,
    model: M,
}

pub fn model_to_json(model: &SystemModel) -> String {
    render(&ModelDoc {
        schema_version: SCHEMA_VERSION,
        model,
    })
}

pub fn model_from_json(text: &str) -> Result<SystemModel, JsonError> {
    let value: Value = serde_json::from_str(text)?;
    match value.get("schema_version").and_then(Value::as_u64) {
        Some(1) => {}
        Some(v) => return Err(JsonError::Version(v)),
        None => return Err(JsonError::Shape("missing schema_version".into())),
    }
    let doc: ModelDoc<SystemModel> = serde_json::from_value(value)?;
    Ok(doc.model)
}

pub fn decision_json(decision: &CompositeDecision) -> String {
    render(&DecisionView::new(decision))
}

#[derive(Serialize)]
struct FrontierDoc<'a> {
    schema_version: u32,
    node: &'a str,
    feasible: usize,
    decisions: Vec<DecisionView<'a>>,
}

pub fn frontier_json(solution: &NodeSolution) -> String {
    render(&FrontierDoc {
        schema_version: SCHEMA_VERSION,
        node: &solution.node,
        feasible: solution.feasible,
        decisions: solution.frontier.iter().map(DecisionView::new).collect(),
    })
}

#[derive(Serialize)]
struct SpaceDoc {
    schema_version: u32,
    space: u128,
}

pub fn space_json(space: u128) -> String {
    render(&SpaceDoc {
        schema_version: SCHEMA_VERSION,
        space,
    })
}

#[derive(Serialize)]
struct ActionView<'a> {
    spec: String,
    #[serde(flatten)]
    action: &'a ImprovementAction,
}

fn action_views(actions: &[ImprovementAction]) -> Vec<ActionView<'_>> {
    actions
        .iter()
        .map(|a| ActionView {
            spec: a.spec().to_string(),
            action: a,
        })
        .collect()
}

#[derive(Serialize)]
struct BottleneckDoc<'a> {
    schema_version: u32,
    node: &'a str,
    decision_index: usize,
    decision: DecisionView<'a>,
    elements: &'a [ElementBottleneck],
    compat: &'a [CompatBottleneck],
    actions: Vec<ActionView<'a>>,
}

pub fn bottlenecks_json(
    decision_index: usize,
    decision: &CompositeDecision,
    elements: &[ElementBottleneck],
    compat: &[CompatBottleneck],
    actions: &[ImprovementAction],
) -> String {
    render(&BottleneckDoc {
        schema_version: SCHEMA_VERSION,
        node: &decision.node,
        decision_index,
        decision: DecisionView::new(decision),
        elements,
        compat,
        actions: action_views(actions),
    })
}

#[derive(Serialize)]
struct WhatIfDoc<'a> {
    schema_version: u32,
    node: &'a str,
    actions: Vec<ActionView<'a>>,
    quality_before: &'a QualityVector,
    quality_after: &'a QualityVector,
    dominance_delta: &'static str,
    frontier_effect: &'a crate::improvement::FrontierEffect,
    decision_after: DecisionView<'a>,
    frontier_after: Vec<DecisionView<'a>>,
}

pub fn whatif_json(report: &WhatIfReport) -> String {
    render(&WhatIfDoc {
        schema_version: SCHEMA_VERSION,
        node: &report.node,
        actions: action_views(&report.actions),
        quality_before: &report.quality_before,
        quality_after: &report.quality_after,
        dominance_delta: report.dominance_delta.as_str(),
        frontier_effect: &report.frontier_effect,
        decision_after: DecisionView::new(&report.decision_after),
        frontier_after: report
            .frontier_after
            .iter()
            .map(DecisionView::new)
            .collect(),
    })
}

#[derive(Serialize)]
struct RankDoc<'a> {
    schema_version: u32,
    recompute: bool,
    params: RankingParams,
    priorities: BTreeMap<&'a str, u32>,
    agreement: &'a AgreementReport,
}

pub fn rank_json(
    recompute: bool,
    params: RankingParams,
    priorities: &std::collections::HashMap<String, u32>,
    agreement: &AgreementReport,
) -> String {
    render(&RankDoc {
        schema_version: SCHEMA_VERSION,
        recompute,
        params,
        priorities: priorities.iter().map(|(k, v)| (k.as_str(), *v)).collect(),
        agreement,
    })
}

#[derive(Serialize)]
struct ErrorDoc<'a> {
    error: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    node: Option<&'a str>,
    message: String,
}

fn error_doc(kind: &str, node: Option<&str>, message: String) -> String {
    render(&ErrorDoc {
        error: kind,
        node,
        message,
    })
}

pub fn composition_error_json(err: &CompositionError) -> String {
    let kind = match err {
        CompositionError::Infeasible { .. } => "infeasible-node",
        CompositionError::MissingEntry { .. } => "missing-entry",
        CompositionError::ShapeMismatch(..) => "incomparable-shapes",
        CompositionError::UnknownNode(_) | CompositionError::UnknownAlternative(_) => "not-found",
        CompositionError::NotComposite(_) => "not-composite",
        CompositionError::CapExceeded { .. } => "cap-exceeded",
        CompositionError::SameLeaf(..) | CompositionError::InvalidSelection { .. } => {
            "invalid-selection"
        }
        CompositionError::Ranking(RankingError::UndefinedWeights { .. }) => "undefined-weights",
        CompositionError::Ranking(_) => "ranking",
    };
    let node = match err {
        CompositionError::Infeasible { node } | CompositionError::InvalidSelection { node, .. } => {
            Some(node.as_str())
        }
        CompositionError::UnknownNode(n) | CompositionError::NotComposite(n) => Some(n.as_str()),
        _ => None,
    };
    error_doc(kind, node, err.to_string())
}

pub fn improvement_error_json(err: &ImprovementError) -> String {
    match err {
        ImprovementError::Composition(c) => composition_error_json(c),
        ImprovementError::NotFound(_) => error_doc("not-found", None, err.to_string()),
        ImprovementError::Syntax(_) => error_doc("action-syntax", None, err.to_string()),
        ImprovementError::NotAnImprovement(..) => {
            error_doc("not-an-improvement", None, err.to_string())
        }
    }
}

pub fn ranking_error_json(err: &RankingError) -> String {
    composition_error_json(&CompositionError::Ranking(err.clone()))
}

pub fn message_error_json(kind: &str, message: impl Into<String>) -> String {
    error_doc(kind, None, message.into())
}

#[derive(Serialize)]
struct ParseErrorDoc<'a> {
    error: &'static str,
    diagnostics: &'a [ParseDiagnostic],
}

pub fn parse_error_json(diagnostics: &[ParseDiagnostic]) -> String {
    render(&ParseErrorDoc {
        error: "parse",
        diagnostics,
    })
}

#[derive(Serialize)]
struct ValidateDoc<'a> {
    schema_version: u32,
    valid: bool,
    diagnostics: &'a [Diagnostic],
}

pub fn validate_json(diagnostics: &[Diagnostic]) -> String {
    render(&ValidateDoc {
        schema_version: SCHEMA_VERSION,
        valid: diagnostics.is_empty(),
        diagnostics,
    })
}

/// Decision skeleton from `{"selection": {...}}`; qualities and
/// priorities are placeholders to be filled by `Composer::recompute`.
pub fn decision_from_value(
    value: &Value,
    node: &str,
    model: &SystemModel,
) -> Result<CompositeDecision, JsonError> {
    let shape = |m: String| JsonError::Shape(m);
    let part = model
        .find_part(node)
        .ok_or_else(|| shape(format!("unknown node {node}")))?;
    let Part::Composite(c) = part else {
        return Err(shape(format!("{node} is a leaf")));
    };
    let selection = value
        .get("selection")
        .and_then(Value::as_object)
        .ok_or_else(|| shape(format!("decision for {node} needs a `selection` object")))?;
    if selection.len() != c.children.len() {
        return Err(shape(format!(
            "selection for {node} has {} members, expected {}",
            selection.len(),
            c.children.len()
        )));
    }
    let mut choices = Vec::with_capacity(c.children.len());
    for child in &c.children {
        let v = selection
            .get(child.id())
            .ok_or_else(|| shape(format!("selection for {node} lacks member {}", child.id())))?;
        let pick = match (child, v) {
            (Part::Leaf(_), Value::String(id)) => Pick::Alternative {
                id: id.clone(),
                priority: 0,
            },
            (Part::Composite(_), Value::Object(_)) => {
                Pick::Composite(decision_from_value(v, child.id(), model)?)
            }
            (Part::Leaf(_), _) => {
                return Err(shape(format!(
                    "member {} must be an alternative id",
                    child.id()
                )))
            }
            (Part::Composite(_), _) => {
                return Err(shape(format!(
                    "member {} must be a decision object",
                    child.id()
                )))
            }
        };
        choices.push(crate::composition::Choice {
            part: child.id().to_string(),
            pick,
        });
    }
    Ok(CompositeDecision {
        node: node.to_string(),
        selection: choices,
        quality: QualityVector::new(0, Vec::new()),
        effective_priority: 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composition::{Composer, SolveOptions};
    use crate::fixtures;

    #[test]
    fn e1_document() {
        let m = fixtures::smart_home();
        let c = Composer::new(&m, SolveOptions::default()).unwrap();
        let e = c.solve_node("E").unwrap();
        assert_eq!(
            decision_json(&e.frontier[0]),
            r#"{"w":3,"n":[1,1,1],"selection":{"J":"J2","K":"K1","L":"L1"}}"#
        );
    }

    #[test]
    fn nested_decisions_carry_priority() {
        let m = fixtures::smart_home();
        let c = Composer::new(&m, SolveOptions::default()).unwrap();
        let a = c.solve_node("A").unwrap();
        let text = decision_json(&a.frontier[0]);
        assert!(
            text.starts_with(
                r#"{"w":3,"n":[2,0,0],"selection":{"D":{"priority":1,"w":3,"n":[1,2,0]"#
            ),
            "{text}"
        );
        let value: Value = serde_json::from_str(&text).unwrap();
        let back = decision_from_value(&value, "A", &m).unwrap();
        assert_eq!(c.recompute(&back).unwrap(), a.frontier[0]);
    }

    #[test]
    fn infeasible_error_document() {
        let err = CompositionError::Infeasible { node: "T".into() };
        let v: Value = serde_json::from_str(&composition_error_json(&err)).unwrap();
        assert_eq!(v["error"], "infeasible-node");
        assert_eq!(v["node"], "T");
    }

    #[test]
    fn model_round_trip() {
        let m = fixtures::smart_home();
        let text = model_to_json(&m);
        assert_eq!(model_from_json(&text).unwrap(), m);
        assert!(matches!(
            model_from_json(&text.replacen("\"schema_version\":1", "\"schema_version\":2", 1)),
            Err(JsonError::Version(2))
        ));
    }

    #[test]
    fn malformed_selection() {
        let m = fixtures::smart_home();
        let v: Value = serde_json::from_str(r#"{"selection":{"J":"J1","K":"K2"}}"#).unwrap();
        assert!(decision_from_value(&v, "E", &m).is_err());
        let v: Value = serde_json::from_str(r#"{"selection":{"J":"J1","K":"K2","L":3}}"#).unwrap();
        assert!(decision_from_value(&v, "E", &m).is_err());
    }
}
