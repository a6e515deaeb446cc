//! JSON bodies exchanged with the engine.
//!
//! | method | path | request | response |
//! |--------|------|---------|----------|
//! | GET | `/health` | | [`Health`] |
//! | POST | `/v1/graphs/build` | [`BuildRequest`] | `GraphDocument` |
//! | POST | `/v1/graphs/synthetic` | [`SynthRequest`] | `GraphDocument` |
//! | POST | `/v1/reason` | [`ReasonRequest`] | `OutcomeDocument` |
//! | POST | `/v1/resolve/sessions` | [`ResolveRequest`] | [`SessionState`] |
//! | POST | `/v1/resolve/sessions/{id}/answer` | [`AnswerRequest`] | [`SessionState`] |
//! | POST | `/v1/resolve/sessions/{id}/finish` | [`FinishRequest`] | `OutcomeDocument` |
//! | DELETE | `/v1/resolve/sessions/{id}` | | `{"deleted": id}` |
//! | POST | `/v1/metrics/tau` | [`TauRequest`] | `ConsistencyReport` |
//! | POST | `/v1/export/dot` | [`DotRequest`] | [`TextResponse`] |
//! | POST | `/v1/export/wcnf` | [`WcnfRequest`] | [`TextResponse`] |
//! | POST | `/v1/evaluate` | [`EvaluateRequest`] | `DatasetReport` |
//! | GET | `/v1/oracle` | | [`OracleIdentity`] |
//! | POST | `/v1/oracle/generate_premises` | [`PremisesRequest`] | [`PremisesResponse`] |
//! | POST | `/v1/oracle/score_statement` | [`ScoreStatementRequest`] | [`ScoreResponse`] |
//! | POST | `/v1/oracle/score_entailment` | [`ScoreEntailmentRequest`] | [`ScoreResponse`] |
//! | POST | `/v1/oracle/negate` | [`NegateRequest`] | [`NegateResponse`] |
//!
//! Failures carry an [`ErrorBody`] and a 4xx or 5xx status.

use std::collections::BTreeSet;
use std::fmt;

use belief_core::construction::MockFixture;
use belief_core::document::{GraphDocument, RunConfig};
use belief_core::metrics::{RuleClass, TauScope};
use belief_core::reasoner::Query;
use belief_core::synth::SynthConfig;
use belief_core::{Assignment, HypothesisSet, Label, StatementId};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub schema_version: u32,
}

/// Where construction gets its answers from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleSpec {
    Mock { fixture: MockFixture },
    Remote { url: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildRequest {
    pub question: HypothesisSet,
    pub oracle: OracleSpec,
    #[serde(default)]
    pub config: RunConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthRequest {
    #[serde(default)]
    pub synth: SynthConfig,
    #[serde(default)]
    pub config: RunConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReasonRequest {
    pub graph: GraphDocument,
    /// Rule classes left out of the solve. Consistency is still judged
    /// against the whole graph.
    #[serde(default)]
    pub ablate: BTreeSet<RuleClass>,
    #[serde(default)]
    pub config: RunConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolveRequest {
    pub graph: GraphDocument,
    #[serde(default)]
    pub config: RunConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendingQuery {
    pub statement: StatementId,
    pub text: String,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session: String,
    pub pending: Option<PendingQuery>,
    pub queries: Vec<Query>,
    /// Rules discarded by the current solution.
    pub conflicts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerRequest {
    pub verdict: Label,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinishRequest {
    /// The answers stopped before the loop did.
    #[serde(default)]
    pub fallback: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauRequest {
    pub graph: GraphDocument,
    /// Defaults to the graph's own labels.
    #[serde(default)]
    pub assignment: Option<Assignment>,
    #[serde(default)]
    pub scope: TauScope,
}

/// Exactly one of the two documents. With an outcome the final beliefs and
/// discarded rules are drawn.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DotRequest {
    #[serde(default)]
    pub graph: Option<GraphDocument>,
    #[serde(default)]
    pub outcome: Option<belief_core::OutcomeDocument>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WcnfRequest {
    pub graph: GraphDocument,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextResponse {
    pub text: String,
}

/// Questions are built with `oracle` first; graphs are used as given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateRequest {
    #[serde(default)]
    pub questions: Vec<HypothesisSet>,
    #[serde(default)]
    pub graphs: Vec<GraphDocument>,
    #[serde(default)]
    pub oracle: Option<OracleSpec>,
    #[serde(default)]
    pub config: RunConfig,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleIdentity {
    pub identity: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PremisesRequest {
    pub hypothesis: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PremisesResponse {
    pub premises: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreStatementRequest {
    pub statement: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreEntailmentRequest {
    pub premises: Vec<String>,
    pub hypothesis: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreResponse {
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NegateRequest {
    pub statement: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NegateResponse {
    pub negation: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// The request or a document in it is malformed.
    Input,
    /// The oracle failed or answered nonsense.
    Oracle,
    /// Hard constraints cannot be met.
    Infeasible,
    NotFound,
    Internal,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorKind::Input => "input",
            ErrorKind::Oracle => "oracle",
            ErrorKind::Infeasible => "infeasible",
            ErrorKind::NotFound => "not_found",
            ErrorKind::Internal => "internal",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub kind: ErrorKind,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}
