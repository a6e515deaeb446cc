//! Belief graph data model.
//!
//! A belief graph is a bipartite factor graph. Statement nodes are the
//! variables: a sentence, the label the model initially assigns it and the
//! confidence in that label. Rule nodes are the factors: disjunctive
//! constraints over statements, read as `premises -> hypotheses`.
//!
//! Everything is kept in cost (negative log weight) space. Flipping a
//! statement against its label costs its confidence, violating a soft rule
//! costs the rule confidence, and violating a hard rule is infeasible.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StatementId(pub u32);

impl fmt::Display for StatementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RuleId(pub u32);

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// True/false belief. Serialized as a JSON boolean.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "bool", into = "bool")]
pub enum Label {
    False,
    True,
}

impl Label {
    pub fn is_true(self) -> bool {
        self == Label::True
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::True => Label::False,
            Label::False => Label::True,
        }
    }
}

impl From<bool> for Label {
    fn from(value: bool) -> Self {
        if value {
            Label::True
        } else {
            Label::False
        }
    }
}

impl From<Label> for bool {
    fn from(label: Label) -> Self {
        label.is_true()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.is_true() { "T" } else { "F" })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatementNode {
    pub id: StatementId,
    pub text: String,
    /// Raw yes/no score the oracle returned for the statement.
    pub raw_score: f64,
    pub label: Label,
    pub confidence: f64,
    /// Distance from the closest top-level hypothesis at creation time.
    pub depth: u32,
    pub is_hypothesis: bool,
    pub negation_of: Option<StatementId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleType {
    Entailment,
    XorPair,
    McHard,
    McPairwise,
}

impl RuleType {
    pub const ALL: [RuleType; 4] = [
        RuleType::Entailment,
        RuleType::XorPair,
        RuleType::McHard,
        RuleType::McPairwise,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleType::Entailment => "entailment",
            RuleType::XorPair => "xor_pair",
            RuleType::McHard => "mc_hard",
            RuleType::McPairwise => "mc_pairwise",
        }
    }
}

impl fmt::Display for RuleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RuleWeight {
    Soft(f64),
    Hard,
}

impl RuleWeight {
    pub fn soft(self) -> Option<f64> {
        match self {
            RuleWeight::Soft(w) => Some(w),
            RuleWeight::Hard => None,
        }
    }

    pub fn is_hard(self) -> bool {
        matches!(self, RuleWeight::Hard)
    }
}

/// A (variable, polarity) pair inside a disjunction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub var: StatementId,
    pub positive: bool,
}

impl Literal {
    pub fn pos(var: StatementId) -> Self {
        Literal { var, positive: true }
    }

    pub fn neg(var: StatementId) -> Self {
        Literal { var, positive: false }
    }

    pub fn satisfied_by(self, value: Label) -> bool {
        value.is_true() == self.positive
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.var)
        } else {
            write!(f, "-{}", self.var)
        }
    }
}

/// Disjunction of literals.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Clause {
    pub literals: Vec<Literal>,
}

impl Clause {
    pub fn satisfied(&self, a: &Assignment) -> Result<bool, ModelError> {
        for lit in &self.literals {
            if lit.satisfied_by(a.require(lit.var)?) {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// The premise view of the clause holds: every negative literal's
    /// statement is believed true.
    pub fn applicable(&self, a: &Assignment) -> Result<bool, ModelError> {
        for lit in self.literals.iter().filter(|l| !l.positive) {
            if !a.require(lit.var)?.is_true() {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuleNode {
    pub id: RuleId,
    pub rule_type: RuleType,
    /// Conjunctive premise (negative literals of the clause).
    pub premises: Vec<StatementId>,
    /// Disjunctive hypothesis (positive literals of the clause).
    pub hypotheses: Vec<StatementId>,
    pub weight: RuleWeight,
    pub raw_score: f64,
}

impl RuleNode {
    pub fn entailment(
        id: RuleId,
        premises: Vec<StatementId>,
        hypothesis: StatementId,
        raw_score: f64,
        confidence: f64,
    ) -> Self {
        RuleNode {
            id,
            rule_type: RuleType::Entailment,
            premises,
            hypotheses: vec![hypothesis],
            weight: RuleWeight::Soft(confidence),
            raw_score,
        }
    }

    /// Soft preference for exactly one of `statement` and `negation`.
    pub fn xor_pair(id: RuleId, statement: StatementId, negation: StatementId, confidence: f64) -> Self {
        RuleNode {
            id,
            rule_type: RuleType::XorPair,
            premises: Vec::new(),
            hypotheses: vec![statement, negation],
            weight: RuleWeight::Soft(confidence),
            raw_score: 1.0,
        }
    }

    /// At least one of `hypotheses` must hold.
    pub fn mc_hard(id: RuleId, hypotheses: Vec<StatementId>) -> Self {
        RuleNode {
            id,
            rule_type: RuleType::McHard,
            premises: Vec::new(),
            hypotheses,
            weight: RuleWeight::Hard,
            raw_score: 1.0,
        }
    }

    /// Soft "not both" between two answer hypotheses.
    pub fn mc_pairwise(id: RuleId, first: StatementId, second: StatementId, confidence: f64) -> Self {
        RuleNode {
            id,
            rule_type: RuleType::McPairwise,
            premises: vec![first, second],
            hypotheses: Vec::new(),
            weight: RuleWeight::Soft(confidence),
            raw_score: 1.0,
        }
    }

    /// The disjunctive clauses this rule contributes. XOR pairs yield two,
    /// every other rule type yields one.
    pub fn clauses(&self) -> Vec<Clause> {
        match self.rule_type {
            RuleType::XorPair => {
                let (s, n) = (self.hypotheses[0], self.hypotheses[1]);
                vec![
                    Clause { literals: vec![Literal::pos(s), Literal::pos(n)] },
                    Clause { literals: vec![Literal::neg(s), Literal::neg(n)] },
                ]
            }
            _ => {
                let literals = self
                    .premises
                    .iter()
                    .map(|&p| Literal::neg(p))
                    .chain(self.hypotheses.iter().map(|&h| Literal::pos(h)))
                    .collect();
                vec![Clause { literals }]
            }
        }
    }

    /// Every statement the rule touches, premises first.
    pub fn statements(&self) -> impl Iterator<Item = StatementId> + '_ {
        self.premises.iter().chain(self.hypotheses.iter()).copied()
    }

    fn validate(&self) -> Result<(), String> {
        let premises: BTreeSet<_> = self.premises.iter().collect();
        let hypotheses: BTreeSet<_> = self.hypotheses.iter().collect();
        if premises.len() != self.premises.len() || hypotheses.len() != self.hypotheses.len() {
            return Err("duplicate statement within premises or hypotheses".into());
        }
        if !premises.is_disjoint(&hypotheses) {
            return Err("premises and hypotheses overlap".into());
        }
        match (self.rule_type, self.weight) {
            (RuleType::McHard, RuleWeight::Soft(_)) => return Err("mc_hard rule must be hard".into()),
            (RuleType::McHard, RuleWeight::Hard) => {}
            (_, RuleWeight::Hard) => return Err(format!("{} rule cannot be hard", self.rule_type)),
            (_, RuleWeight::Soft(w)) if !(w.is_finite() && w >= 0.0) => {
                return Err(format!("confidence {w} is not a finite non-negative number"))
            }
            _ => {}
        }
        let shape_ok = match self.rule_type {
            RuleType::Entailment => self.hypotheses.len() == 1 && !self.premises.is_empty(),
            RuleType::XorPair => self.premises.is_empty() && self.hypotheses.len() == 2,
            RuleType::McHard => self.premises.is_empty() && !self.hypotheses.is_empty(),
            RuleType::McPairwise => self.premises.len() == 2 && self.hypotheses.is_empty(),
        };
        if !shape_ok {
            return Err(format!(
                "{} rule has {} premises and {} hypotheses",
                self.rule_type,
                self.premises.len(),
                self.hypotheses.len()
            ));
        }
        Ok(())
    }
}

/// Cost of an assignment, or the marker for a violated hard constraint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cost {
    Finite(f64),
    Infeasible,
}

impl Cost {
    pub const ZERO: Cost = Cost::Finite(0.0);

    pub fn finite(self) -> Option<f64> {
        match self {
            Cost::Finite(c) => Some(c),
            Cost::Infeasible => None,
        }
    }

    pub fn is_infeasible(self) -> bool {
        matches!(self, Cost::Infeasible)
    }
}

impl Add for Cost {
    type Output = Cost;

    fn add(self, rhs: Cost) -> Cost {
        match (self, rhs) {
            (Cost::Finite(a), Cost::Finite(b)) => Cost::Finite(a + b),
            _ => Cost::Infeasible,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("statement {0} is not assigned")]
    Unassigned(StatementId),
    #[error("rule {rule} references unknown statement {statement}")]
    UnknownStatement { rule: RuleId, statement: StatementId },
    #[error("hypothesis {0} is not a statement of the graph")]
    UnknownHypothesis(StatementId),
    #[error("hypothesis {0} must be flagged as a hypothesis at depth 0")]
    HypothesisShape(StatementId),
    #[error("the hypothesis set is empty")]
    NoHypotheses,
    #[error("statement {id} has confidence {confidence} outside [0, 1]")]
    Confidence { id: StatementId, confidence: f64 },
    #[error("statement map key {key} does not match node id {id}")]
    KeyMismatch { key: StatementId, id: StatementId },
    #[error("duplicate rule id {0}")]
    DuplicateRule(RuleId),
    #[error("invalid rule {rule}: {reason}")]
    InvalidRule { rule: RuleId, reason: String },
    #[error("assignment domain does not match the graph")]
    DomainMismatch,
}

/// Total map from statements to labels.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment {
    labels: BTreeMap<StatementId, Label>,
}

impl Assignment {
    pub fn new(labels: BTreeMap<StatementId, Label>) -> Self {
        Assignment { labels }
    }

    pub fn get(&self, id: StatementId) -> Option<Label> {
        self.labels.get(&id).copied()
    }

    pub fn require(&self, id: StatementId) -> Result<Label, ModelError> {
        self.get(id).ok_or(ModelError::Unassigned(id))
    }

    pub fn set(&mut self, id: StatementId, label: Label) {
        self.labels.insert(id, label);
    }

    pub fn iter(&self) -> impl Iterator<Item = (StatementId, Label)> + '_ {
        self.labels.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn covers(&self, g: &BeliefGraph) -> bool {
        self.labels.len() == g.statements.len() && g.statements.keys().all(|id| self.labels.contains_key(id))
    }
}

impl FromIterator<(StatementId, Label)> for Assignment {
    fn from_iter<I: IntoIterator<Item = (StatementId, Label)>>(iter: I) -> Self {
        Assignment { labels: iter.into_iter().collect() }
    }
}

/// Statement and rule nodes plus the ordered hypothesis set.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefGraph {
    statements: BTreeMap<StatementId, StatementNode>,
    rules: Vec<RuleNode>,
    hypotheses: Vec<StatementId>,
}

impl BeliefGraph {
    pub fn new(
        statements: BTreeMap<StatementId, StatementNode>,
        rules: Vec<RuleNode>,
        hypotheses: Vec<StatementId>,
    ) -> Result<Self, ModelError> {
        if hypotheses.is_empty() {
            return Err(ModelError::NoHypotheses);
        }
        for (&key, node) in &statements {
            if key != node.id {
                return Err(ModelError::KeyMismatch { key, id: node.id });
            }
            if !(0.0..=1.0).contains(&node.confidence) {
                return Err(ModelError::Confidence { id: node.id, confidence: node.confidence });
            }
        }
        for &h in &hypotheses {
            let node = statements.get(&h).ok_or(ModelError::UnknownHypothesis(h))?;
            if !node.is_hypothesis || node.depth != 0 {
                return Err(ModelError::HypothesisShape(h));
            }
        }
        let mut seen = BTreeSet::new();
        for rule in &rules {
            if !seen.insert(rule.id) {
                return Err(ModelError::DuplicateRule(rule.id));
            }
            rule.validate().map_err(|reason| ModelError::InvalidRule { rule: rule.id, reason })?;
            if let Some(statement) = rule.statements().find(|s| !statements.contains_key(s)) {
                return Err(ModelError::UnknownStatement { rule: rule.id, statement });
            }
        }
        Ok(BeliefGraph { statements, rules, hypotheses })
    }

    pub fn statements(&self) -> impl Iterator<Item = &StatementNode> + '_ {
        self.statements.values()
    }

    pub fn statement(&self, id: StatementId) -> Option<&StatementNode> {
        self.statements.get(&id)
    }

    pub fn statement_count(&self) -> usize {
        self.statements.len()
    }

    pub fn rules(&self) -> &[RuleNode] {
        &self.rules
    }

    pub fn rule(&self, id: RuleId) -> Option<&RuleNode> {
        self.rules.iter().find(|r| r.id == id)
    }

    pub fn hypotheses(&self) -> &[StatementId] {
        &self.hypotheses
    }

    /// The labels the graph currently holds.
    pub fn labels(&self) -> Assignment {
        self.statements.values().map(|s| (s.id, s.label)).collect()
    }

    /// Same structure, with rules replaced. Re-validates.
    pub fn with_rules(&self, rules: Vec<RuleNode>) -> Result<Self, ModelError> {
        BeliefGraph::new(self.statements.clone(), rules, self.hypotheses.clone())
    }

    /// Same structure, with statement labels replaced by `a`.
    pub fn relabeled(&self, a: &Assignment) -> Result<Self, ModelError> {
        if !a.covers(self) {
            return Err(ModelError::DomainMismatch);
        }
        let mut statements = self.statements.clone();
        for node in statements.values_mut() {
            node.label = a.require(node.id)?;
        }
        Ok(BeliefGraph { statements, rules: self.rules.clone(), hypotheses: self.hypotheses.clone() })
    }

    pub fn into_parts(self) -> (BTreeMap<StatementId, StatementNode>, Vec<RuleNode>, Vec<StatementId>) {
        (self.statements, self.rules, self.hypotheses)
    }
}

/// Zero when `assigned` agrees with the node's label, its confidence otherwise.
pub fn statement_cost(node: &StatementNode, assigned: Label) -> f64 {
    if assigned == node.label {
        0.0
    } else {
        node.confidence
    }
}

/// Every clause of the rule holds under `a`.
pub fn rule_satisfied(rule: &RuleNode, a: &Assignment) -> Result<bool, ModelError> {
    for clause in rule.clauses() {
        if !clause.satisfied(a)? {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn rule_cost(rule: &RuleNode, a: &Assignment) -> Result<Cost, ModelError> {
    if rule_satisfied(rule, a)? {
        return Ok(Cost::ZERO);
    }
    Ok(match rule.weight {
        RuleWeight::Soft(w) => Cost::Finite(w),
        RuleWeight::Hard => Cost::Infeasible,
    })
}

/// Sum of statement and rule costs of `a` over `g`.
pub fn total_cost(g: &BeliefGraph, a: &Assignment) -> Result<Cost, ModelError> {
    if !a.covers(g) {
        return Err(ModelError::DomainMismatch);
    }
    let mut total = 0.0;
    for node in g.statements() {
        total += statement_cost(node, a.require(node.id)?);
    }
    let mut cost = Cost::Finite(total);
    for rule in g.rules() {
        cost = cost + rule_cost(rule, a)?;
    }
    Ok(cost)
}

/// `exp(-total_cost)`; zero for infeasible assignments.
pub fn assignment_weight(g: &BeliefGraph, a: &Assignment) -> Result<f64, ModelError> {
    Ok(match total_cost(g, a)? {
        Cost::Finite(c) => (-c).exp(),
        Cost::Infeasible => 0.0,
    })
}
