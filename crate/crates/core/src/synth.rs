//! Seeded synthetic instances for tests and benchmarks.
//!
//! [`random_clause_set`] draws unstructured weighted instances with mixed
//! hard and soft clauses. [`synthetic_graph`] draws belief graphs shaped
//! like constructed ones (hypotheses, multiple-choice rules, entailment
//! trees and negation pairs) with a chosen number of violated entailment
//! rules planted in the initial labels.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::{calibrate_rule, calibrate_statement, CalibrationConfig};
use crate::maxsat::{Variable, WeightedClause, WeightedClauseSet};
use crate::model::{BeliefGraph, Label, Literal, RuleId, RuleNode, RuleType, StatementId, StatementNode};

/// Random instance over `variables` variables. Roughly one clause in six is
/// hard, so some instances are infeasible. Half of the instances draw soft
/// weights from a coarse grid to produce exact ties.
pub fn random_clause_set(seed: u64, variables: usize) -> WeightedClauseSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coarse = rng.random_bool(0.5);
    let weight = |rng: &mut ChaCha8Rng| {
        if coarse {
            f64::from(rng.random_range(1..=8u32)) * 0.25
        } else {
            rng.random_range(0.01..1.5)
        }
    };
    let vars: Vec<Variable> = (0..variables)
        .map(|i| Variable { id: StatementId(i as u32 * 3 + 1), initial: Label::from(rng.random_bool(0.5)) })
        .collect();

    let mut clauses = Vec::new();
    for v in &vars {
        if rng.random_bool(0.9) {
            let agree = rng.random_bool(0.9);
            let lit = Literal { var: v.id, positive: v.initial.is_true() == agree };
            clauses.push(WeightedClause::soft(vec![lit], weight(&mut rng)).expect("positive weight"));
        }
    }
    let count = rng.random_range(variables..=variables * 3);
    for _ in 0..count {
        let len = rng.random_range(1..=4usize.min(variables));
        let picked: Vec<&Variable> = vars.choose_multiple(&mut rng, len).collect();
        let literals = picked.iter().map(|v| Literal { var: v.id, positive: rng.random_bool(0.5) }).collect();
        let clause = if rng.random_bool(1.0 / 6.0) {
            WeightedClause::hard(literals)
        } else {
            WeightedClause::soft(literals, weight(&mut rng))
        };
        clauses.push(clause.expect("distinct variables"));
    }
    WeightedClauseSet::new(vars, clauses).expect("generated over declared variables")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub max_statements: usize,
    pub max_rules: usize,
    pub min_hypotheses: usize,
    pub max_hypotheses: usize,
    /// Number of violated entailment rules, drawn from this inclusive range.
    pub violations: (usize, usize),
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { max_statements: 400, max_rules: 90, min_hypotheses: 2, max_hypotheses: 5, violations: (1, 5) }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticGraph {
    pub graph: BeliefGraph,
    /// Rules violated by the initial labels.
    pub violated: Vec<RuleId>,
    /// Conditional violation rate of the initial labels, counted per
    /// clause over all rules.
    pub expected_tau: f64,
}

/// Draws a belief graph. Every rule outside `violated` is satisfied by the
/// initial labels. Each violated rule has a fresh weak premise that occurs
/// in no other rule, believed TRUE with confidence below the rule's, so
/// flipping that premise is always a strictly cheaper repair.
pub fn synthetic_graph(seed: u64, synth: &SynthConfig, cfg: &CalibrationConfig) -> SyntheticGraph {
    Synth::new(seed, synth, cfg).run()
}

struct Synth<'a> {
    rng: ChaCha8Rng,
    synth: &'a SynthConfig,
    cfg: &'a CalibrationConfig,
    statements: BTreeMap<StatementId, StatementNode>,
    rules: Vec<RuleNode>,
    /// Statements that may still receive a supporting rule.
    frontier: Vec<StatementId>,
    /// Statements that may be reused as premises.
    reusable: Vec<StatementId>,
    negated: BTreeSet<StatementId>,
}

impl<'a> Synth<'a> {
    fn new(seed: u64, synth: &'a SynthConfig, cfg: &'a CalibrationConfig) -> Self {
        Synth {
            rng: ChaCha8Rng::seed_from_u64(seed),
            synth,
            cfg,
            statements: BTreeMap::new(),
            rules: Vec::new(),
            frontier: Vec::new(),
            reusable: Vec::new(),
            negated: BTreeSet::new(),
        }
    }

    fn add_statement(&mut self, label: Label, confidence: f64, depth: u32, negation_of: Option<StatementId>) -> StatementId {
        let id = StatementId(self.statements.len() as u32);
        let raw = (confidence.ln() / self.cfg.k + 1.0).clamp(0.5, 1.0);
        let raw_score = if label.is_true() { raw } else { 1.0 - raw };
        self.statements.insert(
            id,
            StatementNode {
                id,
                text: format!("synthetic statement {}", id.0),
                raw_score,
                label,
                confidence,
                depth,
                is_hypothesis: depth == 0 && negation_of.is_none(),
                negation_of,
            },
        );
        id
    }

    fn random_confidence(&mut self) -> f64 {
        let raw = self.rng.random_range(0.5..=1.0);
        calibrate_statement(raw, self.cfg).expect("raw score in range")
    }

    fn next_rule_id(&self) -> RuleId {
        RuleId(self.rules.len() as u32)
    }

    fn run(mut self) -> SyntheticGraph {
        let k = self.rng.random_range(self.synth.min_hypotheses..=self.synth.max_hypotheses);
        let gold = self.rng.random_range(0..k);
        let mut hypotheses = Vec::with_capacity(k);
        for i in 0..k {
            let c = self.random_confidence();
            let h = self.add_statement(Label::from(i == gold), c, 0, None);
            hypotheses.push(h);
            self.frontier.push(h);
        }

        let mc_rules = 1 + k * (k - 1) / 2;
        let budget = self.synth.max_rules.saturating_sub(mc_rules);
        let (lo, hi) = self.synth.violations;
        let mut to_violate = self.rng.random_range(lo..=hi).min(budget);
        let mut violated = Vec::new();

        while self.rules.len() < budget && self.statements.len() + 2 <= self.synth.max_statements {
            let remaining = budget - self.rules.len();
            if to_violate > 0 && (self.rng.random_bool(0.2) || remaining <= to_violate) {
                if let Some(id) = self.violated_entailment() {
                    violated.push(id);
                    to_violate -= 1;
                    continue;
                }
            }
            if self.rng.random_bool(0.25) {
                if self.xor_pair().is_none() {
                    self.entailment();
                }
            } else if self.entailment().is_none() {
                break;
            }
        }

        let mc_hard = self.next_rule_id();
        self.rules.push(RuleNode::mc_hard(mc_hard, hypotheses.clone()));
        let pairwise = calibrate_rule(1.0, RuleType::McPairwise, self.cfg).expect("soft channel");
        for i in 0..k {
            for j in i + 1..k {
                let id = self.next_rule_id();
                self.rules.push(RuleNode::mc_pairwise(id, hypotheses[i], hypotheses[j], pairwise));
            }
        }

        let graph = BeliefGraph::new(self.statements, self.rules, hypotheses).expect("generator keeps invariants");
        let expected_tau = expected_tau(&graph, &violated);
        SyntheticGraph { graph, violated, expected_tau }
    }

    fn label(&self, id: StatementId) -> Label {
        self.statements[&id].label
    }

    fn pick_conclusion(&mut self, want: Option<Label>) -> Option<StatementId> {
        let candidates: Vec<usize> = (0..self.frontier.len())
            .filter(|&i| want.is_none_or(|l| self.label(self.frontier[i]) == l))
            .collect();
        let &i = candidates.choose(&mut self.rng)?;
        Some(self.frontier.swap_remove(i))
    }

    fn entailment_weight(&mut self, strong: bool) -> (f64, f64) {
        // 1.02 * exp(36 (s - 1)) >= 0.5 for s >= 0.9803
        let raw = if strong { self.rng.random_range(0.985..=1.0) } else { self.rng.random_range(0.9..=1.0) };
        (raw, calibrate_rule(raw, RuleType::Entailment, self.cfg).expect("soft channel"))
    }

    /// A satisfied rule `P -> c` with fresh and occasionally reused premises.
    fn entailment(&mut self) -> Option<RuleId> {
        let conclusion = self.pick_conclusion(None)?;
        let depth = self.statements[&conclusion].depth + 1;
        let room = self.synth.max_statements - self.statements.len();
        let fresh = self.rng.random_range(2..=7usize).min(room);
        if fresh == 0 {
            return None;
        }
        let mut premises = Vec::new();
        for _ in 0..fresh {
            let label = Label::from(self.rng.random_bool(0.75));
            let c = self.random_confidence();
            let p = self.add_statement(label, c, depth, None);
            premises.push(p);
        }
        if self.rng.random_bool(0.15) {
            if let Some(&r) = self.reusable.choose(&mut self.rng) {
                if r != conclusion && !premises.contains(&r) {
                    premises.push(r);
                }
            }
        }
        let fresh_ids = premises[..fresh].to_vec();
        if !self.label(conclusion).is_true() && premises.iter().all(|&p| self.label(p).is_true()) {
            let p = fresh_ids[0];
            self.statements.get_mut(&p).expect("just added").label = Label::False;
            let node = &self.statements[&p];
            let flipped_raw = 1.0 - node.raw_score;
            self.statements.get_mut(&p).expect("just added").raw_score = flipped_raw;
        }
        self.frontier.extend(&fresh_ids);
        self.reusable.extend(&fresh_ids);
        let (raw, weight) = self.entailment_weight(false);
        let id = self.next_rule_id();
        self.rules.push(RuleNode::entailment(id, premises, conclusion, raw, weight));
        Some(id)
    }

    /// A rule with all premises TRUE and its conclusion FALSE.
    fn violated_entailment(&mut self) -> Option<RuleId> {
        let room = self.synth.max_statements - self.statements.len();
        if room < 2 {
            return None;
        }
        let conclusion = self.pick_conclusion(Some(Label::False))?;
        let depth = self.statements[&conclusion].depth + 1;
        let weak_conf = self.rng.random_range(0.05..=0.2);
        let weak = self.add_statement(Label::True, weak_conf, depth, None);
        let mut premises = vec![weak];
        for _ in 0..self.rng.random_range(1..=3usize).min(room - 1) {
            let c = self.random_confidence().max(0.3);
            let p = self.add_statement(Label::True, c, depth, None);
            premises.push(p);
            self.frontier.push(p);
            self.reusable.push(p);
        }
        let (raw, weight) = self.entailment_weight(true);
        let id = self.next_rule_id();
        self.rules.push(RuleNode::entailment(id, premises, conclusion, raw, weight));
        Some(id)
    }

    /// A satisfied negation pair on a statement that has none yet.
    fn xor_pair(&mut self) -> Option<RuleId> {
        let candidates: Vec<StatementId> =
            self.reusable.iter().copied().filter(|s| !self.negated.contains(s)).collect();
        let &s = candidates.choose(&mut self.rng)?;
        let depth = self.statements[&s].depth + 1;
        let c = self.random_confidence();
        let n = self.add_statement(self.label(s).flipped(), c, depth, Some(s));
        self.negated.insert(s);
        self.negated.insert(n);
        self.frontier.push(n);
        let weight = calibrate_rule(1.0, RuleType::XorPair, self.cfg).expect("soft channel");
        let id = self.next_rule_id();
        self.rules.push(RuleNode::xor_pair(id, s, n, weight));
        Some(id)
    }
}

/// Each rule contributes its clauses; a planted violation is one applicable
/// and violated clause, every other clause is either inapplicable or
/// applicable and satisfied.
fn expected_tau(g: &BeliefGraph, violated: &[RuleId]) -> f64 {
    let labels = g.labels();
    let mut applicable = 0usize;
    for rule in g.rules() {
        for clause in rule.clauses() {
            if clause.applicable(&labels).expect("total labels") {
                applicable += 1;
            }
        }
    }
    if applicable == 0 {
        0.0
    } else {
        violated.len() as f64 / applicable as f64
    }
}
