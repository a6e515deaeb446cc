//! JSON documents: graphs, reasoning outcomes and run configuration.
//!
//! Every document carries `schema_version`. Unknown fields are rejected so
//! that typos in hand-written fixtures surface as errors.

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::calibration::CalibrationConfig;
use crate::maxsat::SolverConfig;
use crate::metrics::{tau_of, RuleClass, TauScope};
use crate::model::{
    Assignment, BeliefGraph, Label, ModelError, RuleId, RuleNode, RuleType, RuleWeight, StatementId, StatementNode,
};
use crate::reasoner::{ExplanationSubgraph, Query, ReasoningOutcome, ResolutionOutcome};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    SchemaVersion { found: u32 },
    #[error("rule {rule}: {reason}")]
    Rule { rule: RuleId, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub oracle: String,
    pub config_digest: String,
    /// The configuration the graph was built with.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<RunConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleRecord {
    pub id: RuleId,
    #[serde(rename = "type")]
    pub rule_type: RuleType,
    pub premises: Vec<StatementId>,
    pub hypotheses: Vec<StatementId>,
    pub raw_score: f64,
    /// `null` for hard rules.
    pub confidence: Option<f64>,
    pub hard: bool,
}

impl From<&RuleNode> for RuleRecord {
    fn from(rule: &RuleNode) -> Self {
        RuleRecord {
            id: rule.id,
            rule_type: rule.rule_type,
            premises: rule.premises.clone(),
            hypotheses: rule.hypotheses.clone(),
            raw_score: rule.raw_score,
            confidence: rule.weight.soft(),
            hard: rule.weight.is_hard(),
        }
    }
}

impl TryFrom<&RuleRecord> for RuleNode {
    type Error = DocumentError;

    fn try_from(r: &RuleRecord) -> Result<Self, Self::Error> {
        let weight = match (r.hard, r.confidence) {
            (true, None) => RuleWeight::Hard,
            (false, Some(c)) => RuleWeight::Soft(c),
            (true, Some(_)) => {
                return Err(DocumentError::Rule { rule: r.id, reason: "hard rules take a null confidence".into() })
            }
            (false, None) => {
                return Err(DocumentError::Rule { rule: r.id, reason: "soft rules need a confidence".into() })
            }
        };
        Ok(RuleNode {
            id: r.id,
            rule_type: r.rule_type,
            premises: r.premises.clone(),
            hypotheses: r.hypotheses.clone(),
            weight,
            raw_score: r.raw_score,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_index: Option<usize>,
    pub hypotheses: Vec<StatementId>,
    pub statements: Vec<StatementNode>,
    pub rules: Vec<RuleRecord>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl GraphDocument {
    pub fn from_graph(g: &BeliefGraph, provenance: Provenance) -> Self {
        GraphDocument {
            schema_version: SCHEMA_VERSION,
            question_id: None,
            gold_index: None,
            hypotheses: g.hypotheses().to_vec(),
            statements: g.statements().cloned().collect(),
            rules: g.rules().iter().map(RuleRecord::from).collect(),
            provenance,
        }
    }

    pub fn to_graph(&self) -> Result<BeliefGraph, DocumentError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(DocumentError::SchemaVersion { found: self.schema_version });
        }
        let statements = self.statements.iter().map(|s| (s.id, s.clone())).collect();
        let rules = self.rules.iter().map(RuleNode::try_from).collect::<Result<Vec<_>, _>>()?;
        Ok(BeliefGraph::new(statements, rules, self.hypotheses.clone())?)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("documents serialize");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, DocumentError> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Answer {
    pub index: usize,
    pub statement: StatementId,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub tau_before: f64,
    /// On the updated graph.
    pub tau_after: f64,
    /// Final beliefs against every rule of the input graph.
    pub tau_after_full_graph: f64,
    pub consistency_before: f64,
    pub consistency_after: f64,
    pub flips: usize,
    pub discarded: usize,
    pub optimal_cost: f64,
    pub tau_scope: TauScope,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub ablated: BTreeSet<RuleClass>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolutionRecord {
    pub queries: Vec<Query>,
    pub remaining_conflicts: usize,
    pub budget_exhausted: bool,
    pub fallback: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeDocument {
    pub schema_version: u32,
    /// The graph that was reasoned over, before any change.
    pub graph: GraphDocument,
    pub assignment: Assignment,
    pub flipped: Vec<StatementId>,
    pub discarded_rules: Vec<RuleId>,
    pub predictions: Vec<StatementId>,
    pub answers: Vec<Answer>,
    pub explanations: Vec<ExplanationSubgraph>,
    pub summary: Summary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<ResolutionRecord>,
}

impl OutcomeDocument {
    /// `full_graph` is the graph consistency is judged against. It differs
    /// from the outcome's input graph only under ablation.
    pub fn new(
        full_graph: &GraphDocument,
        outcome: &ReasoningOutcome,
        ablated: &BTreeSet<RuleClass>,
        scope: TauScope,
    ) -> Result<Self, DocumentError> {
        let g = full_graph.to_graph()?;
        let before = tau_of(&g, &g.labels(), scope)?;
        let after = tau_of(&outcome.updated_graph, &outcome.final_assignment, scope)?;
        let full = tau_of(&g, &outcome.final_assignment, scope)?;
        let answers = outcome
            .predictions
            .iter()
            .map(|&p| Answer {
                index: g.hypotheses().iter().position(|&h| h == p).expect("predictions are hypotheses"),
                statement: p,
                text: g.statement(p).map(|s| s.text.clone()).unwrap_or_default(),
            })
            .collect();
        Ok(OutcomeDocument {
            schema_version: SCHEMA_VERSION,
            graph: full_graph.clone(),
            assignment: outcome.final_assignment.clone(),
            flipped: outcome.flipped.iter().copied().collect(),
            discarded_rules: outcome.discarded_rules.iter().copied().collect(),
            predictions: outcome.predictions.clone(),
            answers,
            explanations: outcome.explanations.values().cloned().collect(),
            summary: Summary {
                tau_before: before.tau,
                tau_after: after.tau,
                tau_after_full_graph: full.tau,
                consistency_before: before.self_consistency,
                consistency_after: after.self_consistency,
                flips: outcome.flipped.len(),
                discarded: outcome.discarded_rules.len(),
                optimal_cost: outcome.optimal_cost,
                tau_scope: scope,
                ablated: ablated.clone(),
            },
            resolution: None,
        })
    }

    pub fn with_resolution(mut self, r: &ResolutionOutcome) -> Self {
        self.resolution = Some(ResolutionRecord {
            queries: r.queries.clone(),
            remaining_conflicts: r.remaining_conflicts,
            budget_exhausted: r.budget_exhausted,
            fallback: r.fallback,
        });
        self
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("documents serialize");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, DocumentError> {
        let doc: OutcomeDocument = serde_json::from_str(text)?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(DocumentError::SchemaVersion { found: doc.schema_version });
        }
        Ok(doc)
    }

    /// Short plain-text report.
    pub fn summary_text(&self) -> String {
        let s = &self.summary;
        let mut out = String::new();
        if self.answers.is_empty() {
            out.push_str("answer: none\n");
        }
        for a in &self.answers {
            out.push_str(&format!("answer: {} ({}) {}\n", a.index, a.statement, a.text));
        }
        out.push_str(&format!("{} flips, {} rules discarded\n", s.flips, s.discarded));
        out.push_str(&format!(
            "tau before {:.4}, after {:.4} (full graph {:.4})\n",
            s.tau_before, s.tau_after, s.tau_after_full_graph
        ));
        out.push_str(&format!("consistency before {:.4}, after {:.4}\n", s.consistency_before, s.consistency_after));
        if !s.ablated.is_empty() {
            let names: Vec<String> = s.ablated.iter().map(|c| format!("{c:?}").to_lowercase()).collect();
            out.push_str(&format!("ablated: {}\n", names.join(", ")));
        }
        if let Some(r) = &self.resolution {
            out.push_str(&format!("{} questions asked, {} conflicts remaining\n", r.queries.len(), r.remaining_conflicts));
            if r.budget_exhausted {
                out.push_str("query budget exhausted with conflicts remaining\n");
            }
        }
        out
    }

    pub fn final_label(&self, id: StatementId) -> Option<Label> {
        self.assignment.get(id)
    }
}

/// Everything a run depends on besides its inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub calibration: CalibrationConfig,
    pub solver: SolverConfig,
    pub max_statements: usize,
    /// Questions per interactive resolution.
    pub budget: usize,
    pub workers: usize,
    /// Seed for synthetic data; nothing else is random.
    pub seed: u64,
    pub tau_scope: TauScope,
    pub oracle_timeout_ms: u64,
    pub oracle_cache: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            calibration: CalibrationConfig::default(),
            solver: SolverConfig::default(),
            max_statements: crate::construction::BuildOptions::default().max_statements,
            budget: crate::reasoner::DEFAULT_QUERY_BUDGET,
            workers: 1,
            seed: 0,
            tau_scope: TauScope::AllRules,
            oracle_timeout_ms: 10_000,
            oracle_cache: None,
        }
    }
}

impl RunConfig {
    /// SHA-256 of the configuration's JSON form, in hex.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}
