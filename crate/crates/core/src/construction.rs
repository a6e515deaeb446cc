//! Belief graph construction by recursive backward chaining.
//!
//! Starting from the hypothesis set, every statement above the depth cap
//! asks the oracle for one premise set that would entail it, adds the
//! `premises -> statement` rule, and recurses into the premises. Each such
//! statement is also paired with its negation through an XOR rule, and the
//! negation is expanded in turn. Multiple-choice constraints over the
//! hypotheses and boundary damping are applied once the recursion is done.
//!
//! Statements are identified by canonical text, so a statement reached
//! twice is scored and expanded once.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{
    apply_boundary_damping, calibrate_rule, calibrate_statement, label_from_score, xor_admissible,
    CalibrationConfig, CalibrationError,
};
use crate::model::{BeliefGraph, ModelError, RuleId, RuleNode, RuleType, StatementId, StatementNode};

/// Default cap on the number of statement nodes per graph.
pub const DEFAULT_MAX_STATEMENTS: usize = 2000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("oracle transport failure: {0}")]
    Transport(String),
    #[error("oracle request timed out: {0}")]
    Timeout(String),
    #[error("malformed oracle response: {0}")]
    Decode(String),
    #[error("oracle returned an invalid value: {0}")]
    Invalid(String),
}

/// The four model operations graph construction relies on.
///
/// Implementations must be deterministic for a fixed instance and input.
pub trait BeliefOracle: Send + Sync {
    /// One premise set that may entail `hypothesis`. Empty when the model
    /// has nothing to offer.
    fn generate_premises(&self, hypothesis: &str) -> Result<Vec<String>, OracleError>;

    /// Yes/no score in `[0, 1]` that the statement is true.
    fn score_statement(&self, statement: &str) -> Result<f64, OracleError>;

    /// Score in `[0, 1]` that `premises` together entail `hypothesis`.
    fn score_entailment(&self, premises: &[String], hypothesis: &str) -> Result<f64, OracleError>;

    fn negate(&self, statement: &str) -> Result<String, OracleError>;

    /// Short description recorded in document provenance.
    fn identity(&self) -> String {
        "oracle".to_string()
    }
}

impl<T: BeliefOracle + ?Sized> BeliefOracle for &T {
    fn generate_premises(&self, hypothesis: &str) -> Result<Vec<String>, OracleError> {
        (**self).generate_premises(hypothesis)
    }
    fn score_statement(&self, statement: &str) -> Result<f64, OracleError> {
        (**self).score_statement(statement)
    }
    fn score_entailment(&self, premises: &[String], hypothesis: &str) -> Result<f64, OracleError> {
        (**self).score_entailment(premises, hypothesis)
    }
    fn negate(&self, statement: &str) -> Result<String, OracleError> {
        (**self).negate(statement)
    }
    fn identity(&self) -> String {
        (**self).identity()
    }
}

impl<T: BeliefOracle + ?Sized> BeliefOracle for Box<T> {
    fn generate_premises(&self, hypothesis: &str) -> Result<Vec<String>, OracleError> {
        (**self).generate_premises(hypothesis)
    }
    fn score_statement(&self, statement: &str) -> Result<f64, OracleError> {
        (**self).score_statement(statement)
    }
    fn score_entailment(&self, premises: &[String], hypothesis: &str) -> Result<f64, OracleError> {
        (**self).score_entailment(premises, hypothesis)
    }
    fn negate(&self, statement: &str) -> Result<String, OracleError> {
        (**self).negate(statement)
    }
    fn identity(&self) -> String {
        (**self).identity()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstructionError {
    #[error("statement text is empty")]
    EmptyText,
    #[error("hypothesis set is empty")]
    NoHypotheses,
    #[error("duplicate hypothesis {0:?}")]
    DuplicateHypothesis(String),
    #[error("{source} while {context} ({statements} statements and {rules} rules built so far)")]
    Oracle {
        source: OracleError,
        context: String,
        statements: usize,
        rules: usize,
    },
    #[error("statement budget of {limit} nodes exceeded")]
    Budget { limit: usize },
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Lowercased, whitespace-collapsed text with terminal periods removed.
pub fn canonicalize(text: &str) -> Result<String, ConstructionError> {
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    let stripped = collapsed.trim_end_matches(|c: char| c == '.' || c.is_whitespace());
    if stripped.is_empty() {
        return Err(ConstructionError::EmptyText);
    }
    Ok(stripped.to_string())
}

/// Candidate answers of one question, as declarative sentences.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisSet {
    pub hypotheses: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_id: Option<String>,
}

impl HypothesisSet {
    pub fn new(hypotheses: Vec<String>) -> Result<Self, ConstructionError> {
        let hs = HypothesisSet { hypotheses, gold_index: None, question_id: None };
        hs.validate()?;
        Ok(hs)
    }

    /// A true/false question: the statement and its negation.
    pub fn true_false<O: BeliefOracle + ?Sized>(statement: &str, oracle: &O) -> Result<Self, ConstructionError> {
        let negation = oracle.negate(statement).map_err(|source| ConstructionError::Oracle {
            source,
            context: format!("negating {statement:?}"),
            statements: 0,
            rules: 0,
        })?;
        HypothesisSet::new(vec![statement.to_string(), negation])
    }

    pub fn validate(&self) -> Result<(), ConstructionError> {
        if self.hypotheses.is_empty() {
            return Err(ConstructionError::NoHypotheses);
        }
        let mut seen = HashSet::new();
        for h in &self.hypotheses {
            if !seen.insert(canonicalize(h)?) {
                return Err(ConstructionError::DuplicateHypothesis(h.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntailmentEntry {
    pub premises: Vec<String>,
    pub hypothesis: String,
    pub score: f64,
}

fn default_score() -> f64 {
    0.5
}

fn default_entailment_score() -> f64 {
    0.9
}

/// On-disk form of the table-driven oracle.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockFixture {
    #[serde(default)]
    pub premises: BTreeMap<String, Vec<Vec<String>>>,
    #[serde(default)]
    pub statement_scores: BTreeMap<String, f64>,
    #[serde(default)]
    pub entailment_scores: Vec<EntailmentEntry>,
    #[serde(default)]
    pub negations: BTreeMap<String, String>,
    #[serde(default = "default_score")]
    pub default_score: f64,
    #[serde(default = "default_entailment_score")]
    pub default_entailment_score: f64,
}

const NEGATION_PREFIX: &str = "it is not true that ";

/// Deterministic oracle answering from lookup tables.
///
/// Unknown premise queries return no premises, unknown statements get the
/// default score. Negations not in the table fall back to the reverse
/// table entry, then to an `It is not true that ...` prefix that is its own
/// inverse under canonicalization.
#[derive(Clone, Debug)]
pub struct MockOracle {
    premises: HashMap<String, Vec<String>>,
    statement_scores: HashMap<String, f64>,
    entailment_scores: HashMap<(Vec<String>, String), f64>,
    negations: HashMap<String, String>,
    default_score: f64,
    default_entailment_score: f64,
    name: String,
}

impl MockOracle {
    pub fn from_fixture(fixture: &MockFixture) -> Result<Self, ConstructionError> {
        let check = |s: f64| {
            if (0.0..=1.0).contains(&s) {
                Ok(s)
            } else {
                Err(ConstructionError::Calibration(CalibrationError::ScoreOutOfRange(s)))
            }
        };
        let mut premises = HashMap::new();
        for (h, sets) in &fixture.premises {
            // One premise set per statement: the first listed wins.
            let first = sets.first().cloned().unwrap_or_default();
            premises.insert(canonicalize(h)?, first);
        }
        let mut statement_scores = HashMap::new();
        for (s, &score) in &fixture.statement_scores {
            statement_scores.insert(canonicalize(s)?, check(score)?);
        }
        let mut entailment_scores = HashMap::new();
        for entry in &fixture.entailment_scores {
            entailment_scores.insert(entailment_key(&entry.premises, &entry.hypothesis)?, check(entry.score)?);
        }
        let mut negations = HashMap::new();
        for (s, n) in &fixture.negations {
            let (s, n) = (canonicalize(s)?, n.clone());
            negations.entry(canonicalize(&n)?).or_insert_with(|| s.clone());
            negations.insert(s, n);
        }
        Ok(MockOracle {
            premises,
            statement_scores,
            entailment_scores,
            negations,
            default_score: check(fixture.default_score)?,
            default_entailment_score: check(fixture.default_entailment_score)?,
            name: "mock".to_string(),
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

fn entailment_key(premises: &[String], hypothesis: &str) -> Result<(Vec<String>, String), ConstructionError> {
    let mut ps = premises.iter().map(|p| canonicalize(p)).collect::<Result<Vec<_>, _>>()?;
    ps.sort();
    Ok((ps, canonicalize(hypothesis)?))
}

fn invalid(e: ConstructionError) -> OracleError {
    OracleError::Invalid(e.to_string())
}

impl BeliefOracle for MockOracle {
    fn generate_premises(&self, hypothesis: &str) -> Result<Vec<String>, OracleError> {
        let key = canonicalize(hypothesis).map_err(invalid)?;
        Ok(self.premises.get(&key).cloned().unwrap_or_default())
    }

    fn score_statement(&self, statement: &str) -> Result<f64, OracleError> {
        let key = canonicalize(statement).map_err(invalid)?;
        Ok(self.statement_scores.get(&key).copied().unwrap_or(self.default_score))
    }

    fn score_entailment(&self, premises: &[String], hypothesis: &str) -> Result<f64, OracleError> {
        let key = entailment_key(premises, hypothesis).map_err(invalid)?;
        Ok(self.entailment_scores.get(&key).copied().unwrap_or(self.default_entailment_score))
    }

    fn negate(&self, statement: &str) -> Result<String, OracleError> {
        let key = canonicalize(statement).map_err(invalid)?;
        if let Some(n) = self.negations.get(&key) {
            return Ok(n.clone());
        }
        match key.strip_prefix(NEGATION_PREFIX) {
            Some(rest) => Ok(rest.to_string()),
            None => Ok(format!("It is not true that {}", statement.trim())),
        }
    }

    fn identity(&self) -> String {
        self.name.clone()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BuildOptions {
    pub max_statements: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { max_statements: DEFAULT_MAX_STATEMENTS }
    }
}

/// Builds the belief graph for `hs` with the default statement budget.
pub fn generate_graph<O: BeliefOracle + ?Sized>(
    hs: &HypothesisSet,
    oracle: &O,
    cfg: &CalibrationConfig,
) -> Result<BeliefGraph, ConstructionError> {
    generate_graph_with(hs, oracle, cfg, &BuildOptions::default())
}

pub fn generate_graph_with<O: BeliefOracle + ?Sized>(
    hs: &HypothesisSet,
    oracle: &O,
    cfg: &CalibrationConfig,
    options: &BuildOptions,
) -> Result<BeliefGraph, ConstructionError> {
    hs.validate()?;
    cfg.validate()?;
    let mut builder = Builder::new(oracle, cfg, options.max_statements);

    let mut hypothesis_ids = Vec::with_capacity(hs.hypotheses.len());
    for h in &hs.hypotheses {
        let (id, _) = builder.ensure(h, 0, true, None)?;
        hypothesis_ids.push(id);
    }
    for &id in &hypothesis_ids {
        builder.expand(id, 0)?;
    }

    let mc_hard = RuleNode::mc_hard(builder.next_rule_id(), hypothesis_ids.clone());
    builder.rules.push(mc_hard);
    let c_mc = calibrate_rule(1.0, RuleType::McPairwise, cfg)?;
    for (i, &first) in hypothesis_ids.iter().enumerate() {
        for &second in &hypothesis_ids[i + 1..] {
            let rule = RuleNode::mc_pairwise(builder.next_rule_id(), first, second, c_mc);
            builder.rules.push(rule);
        }
    }

    let graph = BeliefGraph::new(builder.statements, builder.rules, hypothesis_ids)?;
    Ok(apply_boundary_damping(&graph, cfg))
}

struct Builder<'a, O: ?Sized> {
    oracle: &'a O,
    cfg: &'a CalibrationConfig,
    max_statements: usize,
    statements: BTreeMap<StatementId, StatementNode>,
    by_text: HashMap<String, StatementId>,
    rules: Vec<RuleNode>,
    xor_pairs: HashSet<(StatementId, StatementId)>,
    premise_memo: HashMap<String, Vec<String>>,
    score_memo: HashMap<String, f64>,
    negation_memo: HashMap<String, String>,
    entailment_memo: HashMap<(Vec<String>, String), f64>,
}

impl<'a, O: BeliefOracle + ?Sized> Builder<'a, O> {
    fn new(oracle: &'a O, cfg: &'a CalibrationConfig, max_statements: usize) -> Self {
        Builder {
            oracle,
            cfg,
            max_statements,
            statements: BTreeMap::new(),
            by_text: HashMap::new(),
            rules: Vec::new(),
            xor_pairs: HashSet::new(),
            premise_memo: HashMap::new(),
            score_memo: HashMap::new(),
            negation_memo: HashMap::new(),
            entailment_memo: HashMap::new(),
        }
    }

    fn next_rule_id(&self) -> RuleId {
        RuleId(self.rules.len() as u32)
    }

    fn oracle_error(&self, source: OracleError, context: String) -> ConstructionError {
        ConstructionError::Oracle { source, context, statements: self.statements.len(), rules: self.rules.len() }
    }

    fn score(&mut self, canonical: &str, text: &str) -> Result<f64, ConstructionError> {
        if let Some(&s) = self.score_memo.get(canonical) {
            return Ok(s);
        }
        let s = self
            .oracle
            .score_statement(text)
            .map_err(|e| self.oracle_error(e, format!("scoring {text:?}")))?;
        if !(0.0..=1.0).contains(&s) {
            return Err(self.oracle_error(OracleError::Invalid(format!("score {s}")), format!("scoring {text:?}")));
        }
        self.score_memo.insert(canonical.to_string(), s);
        Ok(s)
    }

    /// Looks up or creates the node for `text`. The flag is true when the
    /// node was created by this call.
    fn ensure(
        &mut self,
        text: &str,
        depth: u32,
        is_hypothesis: bool,
        negation_of: Option<StatementId>,
    ) -> Result<(StatementId, bool), ConstructionError> {
        let canonical = canonicalize(text)?;
        if let Some(&id) = self.by_text.get(&canonical) {
            return Ok((id, false));
        }
        if self.statements.len() >= self.max_statements {
            return Err(ConstructionError::Budget { limit: self.max_statements });
        }
        let raw_score = self.score(&canonical, text)?;
        let (label, raw_confidence) = label_from_score(raw_score)?;
        let id = StatementId(self.statements.len() as u32);
        let node = StatementNode {
            id,
            text: text.trim().to_string(),
            raw_score,
            label,
            confidence: calibrate_statement(raw_confidence, self.cfg)?,
            depth,
            is_hypothesis,
            negation_of,
        };
        self.statements.insert(id, node);
        self.by_text.insert(canonical, id);
        Ok((id, true))
    }

    fn premises_of(&mut self, text: &str, canonical: &str) -> Result<Vec<String>, ConstructionError> {
        if let Some(p) = self.premise_memo.get(canonical) {
            return Ok(p.clone());
        }
        let p = self
            .oracle
            .generate_premises(text)
            .map_err(|e| self.oracle_error(e, format!("generating premises for {text:?}")))?;
        self.premise_memo.insert(canonical.to_string(), p.clone());
        Ok(p)
    }

    fn negation_of(&mut self, text: &str, canonical: &str) -> Result<String, ConstructionError> {
        if let Some(n) = self.negation_memo.get(canonical) {
            return Ok(n.clone());
        }
        let n = self.oracle.negate(text).map_err(|e| self.oracle_error(e, format!("negating {text:?}")))?;
        self.negation_memo.insert(canonical.to_string(), n.clone());
        Ok(n)
    }

    fn entailment_score(&mut self, premises: &[String], text: &str) -> Result<f64, ConstructionError> {
        let key = entailment_key(premises, text)?;
        if let Some(&s) = self.entailment_memo.get(&key) {
            return Ok(s);
        }
        let s = self
            .oracle
            .score_entailment(premises, text)
            .map_err(|e| self.oracle_error(e, format!("scoring the rule concluding {text:?}")))?;
        if !(0.0..=1.0).contains(&s) {
            return Err(self.oracle_error(
                OracleError::Invalid(format!("entailment score {s}")),
                format!("scoring the rule concluding {text:?}"),
            ));
        }
        self.entailment_memo.insert(key, s);
        Ok(s)
    }

    /// Adds the supporting rule, the negation and their subgraphs below the
    /// node `id` at `depth`. Nothing happens at the depth cap.
    fn expand(&mut self, id: StatementId, depth: u32) -> Result<(), ConstructionError> {
        if depth >= self.cfg.d_max {
            return Ok(());
        }
        let text = self.statements[&id].text.clone();
        let canonical = canonicalize(&text)?;

        let mut premise_texts = Vec::new();
        let mut seen = HashSet::from([canonical.clone()]);
        for p in self.premises_of(&text, &canonical)? {
            let c = canonicalize(&p)?;
            if seen.insert(c) {
                premise_texts.push(p);
            }
        }
        if !premise_texts.is_empty() {
            let mut premise_ids = Vec::with_capacity(premise_texts.len());
            let mut fresh = Vec::new();
            for p in &premise_texts {
                let (pid, created) = self.ensure(p, depth + 1, false, None)?;
                premise_ids.push(pid);
                if created {
                    fresh.push(pid);
                }
            }
            let raw = self.entailment_score(&premise_texts, &text)?;
            let confidence = calibrate_rule(raw, RuleType::Entailment, self.cfg)?;
            let rule = RuleNode::entailment(self.next_rule_id(), premise_ids, id, raw, confidence);
            self.rules.push(rule);
            for pid in fresh {
                self.expand(pid, depth + 1)?;
            }
        }

        let negation = self.negation_of(&text, &canonical)?;
        if canonicalize(&negation)? == canonical {
            return Ok(());
        }
        let (nid, created) = self.ensure(&negation, depth + 1, false, Some(id))?;
        let pair = (id.min(nid), id.max(nid));
        if !self.xor_pairs.contains(&pair) {
            let (s, ns) = (self.statements[&id].raw_score, self.statements[&nid].raw_score);
            if xor_admissible(s, ns, self.cfg) {
                let confidence = calibrate_rule(1.0, RuleType::XorPair, self.cfg)?;
                let rule = RuleNode::xor_pair(self.next_rule_id(), id, nid, confidence);
                self.rules.push(rule);
                self.xor_pairs.insert(pair);
            }
        }
        if created {
            self.expand(nid, depth + 1)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_forms() {
        assert_eq!(canonicalize("The sky is blue.").unwrap(), "the sky is blue");
        assert_eq!(canonicalize("  The  sky is blue").unwrap(), "the sky is blue");
        assert_eq!(canonicalize("Ends twice. . ").unwrap(), "ends twice");
        assert_eq!(canonicalize("   "), Err(ConstructionError::EmptyText));
        assert_eq!(canonicalize("..."), Err(ConstructionError::EmptyText));
    }

    #[test]
    fn hypothesis_sets_reject_duplicates() {
        assert_eq!(HypothesisSet::new(vec![]), Err(ConstructionError::NoHypotheses));
        assert!(matches!(
            HypothesisSet::new(vec!["The sky is blue.".into(), "the sky is  blue".into()]),
            Err(ConstructionError::DuplicateHypothesis(_))
        ));
    }

    #[test]
    fn mock_oracle_defaults_and_negation_involution() {
        let oracle = MockOracle::from_fixture(&MockFixture {
            default_score: 0.7,
            ..MockFixture::default()
        })
        .unwrap();
        assert_eq!(oracle.score_statement("anything").unwrap(), 0.7);
        assert!(oracle.generate_premises("anything").unwrap().is_empty());
        let n = oracle.negate("The sky is blue.").unwrap();
        assert_eq!(canonicalize(&n).unwrap(), "it is not true that the sky is blue");
        let nn = oracle.negate(&n).unwrap();
        assert_eq!(canonicalize(&nn).unwrap(), "the sky is blue");
    }

    #[test]
    fn mock_oracle_tables_are_canonical() {
        let mut fixture = MockFixture::default();
        fixture.statement_scores.insert("The sky is blue.".into(), 0.95);
        fixture.negations.insert("The sky is blue.".into(), "The sky is not blue.".into());
        fixture.entailment_scores.push(EntailmentEntry {
            premises: vec!["B".into(), "A".into()],
            hypothesis: "C".into(),
            score: 0.8,
        });
        let oracle = MockOracle::from_fixture(&fixture).unwrap();
        assert_eq!(oracle.score_statement("the sky is BLUE").unwrap(), 0.95);
        assert_eq!(oracle.negate("the sky is blue").unwrap(), "The sky is not blue.");
        assert_eq!(canonicalize(&oracle.negate("The sky is not blue").unwrap()).unwrap(), "the sky is blue");
        assert_eq!(oracle.score_entailment(&["a".into(), "b.".into()], "c").unwrap(), 0.8);
    }

    #[test]
    fn out_of_range_fixture_scores_are_rejected() {
        let mut fixture = MockFixture::default();
        fixture.statement_scores.insert("x".into(), 1.5);
        assert!(MockOracle::from_fixture(&fixture).is_err());
    }
}
