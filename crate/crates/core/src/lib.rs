//! Belief graphs over natural-language statements: construction from an
//! oracle, calibration of raw scores, exact weighted MaxSAT reasoning,
//! explanations and consistency metrics.

pub mod calibration;
pub mod construction;
pub mod document;
pub mod dot;
pub mod maxsat;
pub mod metrics;
pub mod model;
pub mod reasoner;
pub mod synth;

pub use calibration::CalibrationConfig;
pub use construction::{generate_graph, BeliefOracle, HypothesisSet, MockFixture, MockOracle};
pub use document::{GraphDocument, OutcomeDocument, RunConfig};
pub use maxsat::{brute_force_solve, encode, solve, SolveResult, SolverConfig, WeightedClauseSet};
pub use model::{Assignment, BeliefGraph, Label, RuleId, RuleNode, RuleType, StatementId, StatementNode};
pub use reasoner::{reason, reason_with, ReasonOptions, ReasoningOutcome};
