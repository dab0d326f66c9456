//! Queries shared by the CLI and the HTTP service. Each query returns the
//! JSON document both front ends emit, so their output cannot drift apart.

use morphdes::improvement::{compat_bottlenecks, element_bottlenecks};
use morphdes::json::{self, JsonError};
use morphdes::ranking::agreement_report;
use morphdes::{
    design_space_size, evaluate_actions, propose_actions, resolve_priorities, ActionSpec, Composer,
    CompositeDecision, CompositionError, ImprovementError, NodeSolution, ParseDiagnostic,
    RankingParams, SolveOptions, SourceSpan, SystemModel,
};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    /// The model or the request content is unusable (parse errors,
    /// infeasible node).
    Invalid,
    NotFound,
    BadRequest,
}

impl Failure {
    pub fn http_status(self) -> u16 {
        match self {
            Failure::Invalid => 422,
            Failure::NotFound => 404,
            Failure::BadRequest => 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub failure: Failure,
    /// One-line human message.
    pub message: String,
    /// JSON error document.
    pub body: String,
}

impl ApiError {
    pub fn new(failure: Failure, kind: &str, message: impl Into<String>) -> Self {
        let message = message.into();
        ApiError {
            failure,
            body: json::message_error_json(kind, message.clone()),
            message,
        }
    }
}

impl From<CompositionError> for ApiError {
    fn from(e: CompositionError) -> Self {
        let failure = match e {
            CompositionError::UnknownNode(_) | CompositionError::UnknownAlternative(_) => {
                Failure::NotFound
            }
            CompositionError::Infeasible { .. }
            | CompositionError::MissingEntry { .. }
            | CompositionError::CapExceeded { .. }
            | CompositionError::Ranking(_) => Failure::Invalid,
            CompositionError::NotComposite(_)
            | CompositionError::ShapeMismatch(..)
            | CompositionError::SameLeaf(..)
            | CompositionError::InvalidSelection { .. } => Failure::BadRequest,
        };
        ApiError {
            failure,
            message: e.to_string(),
            body: json::composition_error_json(&e),
        }
    }
}

impl From<ImprovementError> for ApiError {
    fn from(e: ImprovementError) -> Self {
        match e {
            ImprovementError::Composition(c) => c.into(),
            ImprovementError::NotFound(_) => ApiError {
                failure: Failure::NotFound,
                message: e.to_string(),
                body: json::improvement_error_json(&e),
            },
            ImprovementError::Syntax(_) | ImprovementError::NotAnImprovement(..) => ApiError {
                failure: Failure::BadRequest,
                message: e.to_string(),
                body: json::improvement_error_json(&e),
            },
        }
    }
}

pub type ApiResult<T> = Result<T, ApiError>;

/// Parse errors of a model text, rendered for humans and as JSON.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadError {
    pub diagnostics: Vec<ParseDiagnostic>,
}

impl LoadError {
    pub fn body(&self) -> String {
        json::parse_error_json(&self.diagnostics)
    }
}

fn json_diagnostic(message: String, line: usize, column: usize) -> ParseDiagnostic {
    ParseDiagnostic {
        span: SourceSpan {
            line,
            column,
            offset: 0,
        },
        message,
        severity: morphdes::model::Severity::Error,
    }
}

/// Accepts either `.morph` text or a JSON model document (recognised by a
/// leading `{`).
pub fn load_model(text: &str) -> Result<SystemModel, LoadError> {
    if !text.trim_start().starts_with('{') {
        return morphdes::parse(text).map_err(|diagnostics| LoadError { diagnostics });
    }
    let model = json::model_from_json(text).map_err(|e| {
        let d = match &e {
            JsonError::Syntax(s) => json_diagnostic(e.to_string(), s.line(), s.column()),
            _ => json_diagnostic(e.to_string(), 1, 1),
        };
        LoadError {
            diagnostics: vec![d],
        }
    })?;
    let errors: Vec<ParseDiagnostic> = morphdes::validate(&model)
        .into_iter()
        .filter(|d| d.severity == morphdes::model::Severity::Error)
        .map(|d| json_diagnostic(format!("{}: {}", d.path, d.message), 1, 1))
        .collect();
    if errors.is_empty() {
        Ok(model)
    } else {
        Err(LoadError {
            diagnostics: errors,
        })
    }
}

pub fn solve_options(carry_layers: usize, recompute: bool) -> ApiResult<SolveOptions> {
    if carry_layers == 0 {
        return Err(ApiError::new(
            Failure::BadRequest,
            "bad-request",
            "carry_layers must be at least 1",
        ));
    }
    Ok(SolveOptions {
        carry_layers,
        recompute,
        ..SolveOptions::default()
    })
}

/// Frontier of `node`, or of the root when absent.
pub fn solve(
    model: &SystemModel,
    node: Option<&str>,
    options: SolveOptions,
) -> ApiResult<NodeSolution> {
    let composer = Composer::new(model, options)?;
    Ok(match node {
        Some(n) => composer.solve_node(n)?,
        None => composer.solve()?,
    })
}

pub fn space(model: &SystemModel) -> String {
    json::space_json(design_space_size(model))
}

pub struct RankQuery {
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub recompute: bool,
}

pub fn rank(model: &SystemModel, query: &RankQuery) -> ApiResult<String> {
    let defaults = RankingParams::from_model(model);
    let params = RankingParams::new(
        query.p.unwrap_or(defaults.concordance_p),
        query.q.unwrap_or(defaults.discordance_q),
    )
    .map_err(|e| ApiError::new(Failure::BadRequest, "bad-request", e.to_string()))?;
    let ranking = |e: morphdes::ranking::RankingError| ApiError {
        failure: Failure::Invalid,
        message: e.to_string(),
        body: json::ranking_error_json(&e),
    };
    let priorities = resolve_priorities(model, params, query.recompute).map_err(ranking)?;
    let report = agreement_report(model, params).map_err(ranking)?;
    Ok(json::rank_json(
        query.recompute,
        params,
        &priorities,
        &report,
    ))
}

fn frontier_member(solution: &NodeSolution, index: usize) -> ApiResult<&CompositeDecision> {
    solution.frontier.get(index).ok_or_else(|| {
        ApiError::new(
            Failure::NotFound,
            "not-found",
            format!(
                "decision index {index} is out of range: node {} has {} frontier decisions",
                solution.node,
                solution.frontier.len()
            ),
        )
    })
}

pub fn bottlenecks(
    model: &SystemModel,
    node: &str,
    index: usize,
    options: SolveOptions,
) -> ApiResult<String> {
    let composer = Composer::new(model, options)?;
    let solution = composer.solve_node(node)?;
    let decision = frontier_member(&solution, index)?;
    let elements = element_bottlenecks(decision);
    let compat = compat_bottlenecks(decision, &composer)?;
    let actions = propose_actions(decision, &composer)?;
    Ok(json::bottlenecks_json(
        index, decision, &elements, &compat, &actions,
    ))
}

/// A decision addressed by frontier index or given as a decision object.
pub enum DecisionRef {
    Index(usize),
    Object(Value),
}

pub fn parse_actions(texts: &[String]) -> ApiResult<Vec<ActionSpec>> {
    texts
        .iter()
        .map(|t| t.parse::<ActionSpec>().map_err(ApiError::from))
        .collect()
}

pub fn whatif(
    model: &SystemModel,
    node: &str,
    decision: &DecisionRef,
    actions: &[ActionSpec],
    options: SolveOptions,
) -> ApiResult<String> {
    let decision = match decision {
        DecisionRef::Index(i) => {
            let solution = solve(model, Some(node), options.clone())?;
            frontier_member(&solution, *i)?.clone()
        }
        DecisionRef::Object(v) => json::decision_from_value(v, node, model)
            .map_err(|e| ApiError::new(Failure::BadRequest, "bad-request", e.to_string()))?,
    };
    let report = evaluate_actions(&decision, actions, model, &options)?;
    Ok(json::whatif_json(&report))
}
