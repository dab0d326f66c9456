//! Hierarchical morphological multicriteria design.
//!
//! A system is modelled as a tree of parts. Leaf parts hold design
//! alternatives with ordinal estimates; alternatives are ranked into
//! priority layers by an outranking relation ([`ranking`]), then composed
//! bottom-up into Pareto-efficient composite decisions under pairwise
//! compatibility constraints ([`composition`]). Bottlenecks of a decision
//! and what-if improvement actions live in [`improvement`].

pub mod composition;
pub mod fixtures;
pub mod improvement;
pub mod json;
pub mod model;
pub mod modelfile;
pub mod ranking;

pub use composition::{
    brute_force_frontier, dominates, pair_compatibility, pareto_frontier, solve, solve_node,
    Choice, Composer, CompositeDecision, CompositionError, DominanceResult, NodeSolution, Pick,
    QualityVector, SolveOptions,
};
pub use improvement::{
    apply_action, compat_bottlenecks, element_bottlenecks, evaluate_actions, propose_actions,
    ActionSpec, ImprovementAction, ImprovementError, WhatIfReport,
};
pub use model::{design_space_size, validate, Diagnostic, SystemModel};
pub use modelfile::{parse, serialize, ParseDiagnostic, SourceSpan};
pub use ranking::{rank, resolve_priorities, LayerPartition, RankingParams};
