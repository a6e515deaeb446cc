//! Turning a belief graph into a self-consistent one: solve, flip beliefs,
//! drop the rules still in conflict, then read off answers and the rules
//! that support them.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::maxsat::{encode, solve, SolveError, SolveStatus, SolverConfig};
use crate::model::{
    rule_satisfied, Assignment, BeliefGraph, Label, ModelError, RuleId, RuleType, StatementId, StatementNode,
};

#[derive(Debug, Error)]
pub enum ReasonError {
    #[error("hard constraints cannot all be satisfied")]
    Infeasible,
    #[error(transparent)]
    Solver(#[from] SolveError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0} is not a hypothesis")]
    NotAHypothesis(StatementId),
    #[error("{0} is not believed true after reasoning")]
    NotBelieved(StatementId),
    #[error("no query is pending")]
    NoPendingQuery,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReasonOptions {
    pub solver: SolverConfig,
    /// Labels enforced as hard constraints.
    pub pins: Vec<(StatementId, Label)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplanationStep {
    pub rule: RuleId,
    pub conclusion: StatementId,
    pub premises: Vec<StatementId>,
}

/// Supporting entailment rules below a believed hypothesis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplanationSubgraph {
    pub root: StatementId,
    /// In breadth-first order from the root.
    pub steps: Vec<ExplanationStep>,
    /// Root first, then premises in the order they were reached.
    pub statements: Vec<StatementId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReasoningOutcome {
    pub initial_graph: BeliefGraph,
    pub final_assignment: Assignment,
    pub flipped: BTreeSet<StatementId>,
    pub discarded_rules: BTreeSet<RuleId>,
    pub updated_graph: BeliefGraph,
    /// Hypotheses believed true, in hypothesis order.
    pub predictions: Vec<StatementId>,
    pub explanations: BTreeMap<StatementId, ExplanationSubgraph>,
    pub optimal_cost: f64,
    pub nodes_explored: u64,
}

pub fn reason(g: &BeliefGraph) -> Result<ReasoningOutcome, ReasonError> {
    reason_with(g, &ReasonOptions::default())
}

pub fn reason_with(g: &BeliefGraph, options: &ReasonOptions) -> Result<ReasoningOutcome, ReasonError> {
    let mut cs = encode(g);
    for &(id, label) in &options.pins {
        cs.pin(id, label)?;
    }
    let result = solve(&cs, &options.solver)?;
    if result.status == SolveStatus::Infeasible {
        return Err(ReasonError::Infeasible);
    }
    let assignment = result.assignment;

    let flipped = g.statements().filter(|s| assignment.get(s.id) != Some(s.label)).map(|s| s.id).collect();
    let mut kept = Vec::new();
    let mut discarded_rules = BTreeSet::new();
    for rule in g.rules() {
        if rule_satisfied(rule, &assignment)? {
            kept.push(rule.clone());
        } else {
            discarded_rules.insert(rule.id);
        }
    }
    let updated_graph = g.relabeled(&assignment)?.with_rules(kept)?;
    let predictions: Vec<StatementId> =
        g.hypotheses().iter().copied().filter(|&h| assignment.get(h) == Some(Label::True)).collect();
    let explanations = predictions.iter().map(|&h| (h, explanation_in(&updated_graph, h))).collect();

    Ok(ReasoningOutcome {
        initial_graph: g.clone(),
        final_assignment: assignment,
        flipped,
        discarded_rules,
        updated_graph,
        predictions,
        explanations,
        optimal_cost: result.optimal_cost,
        nodes_explored: result.nodes_explored,
    })
}

pub fn predict(outcome: &ReasoningOutcome) -> Vec<StatementId> {
    outcome.predictions.clone()
}

pub fn extract_explanation(outcome: &ReasoningOutcome, h: StatementId) -> Result<ExplanationSubgraph, ReasonError> {
    if !outcome.updated_graph.hypotheses().contains(&h) {
        return Err(ReasonError::NotAHypothesis(h));
    }
    if outcome.final_assignment.get(h) != Some(Label::True) {
        return Err(ReasonError::NotBelieved(h));
    }
    Ok(explanation_in(&outcome.updated_graph, h))
}

/// Breadth-first walk over entailment rules of `g` whose conclusion and
/// premises are all believed true.
fn explanation_in(g: &BeliefGraph, root: StatementId) -> ExplanationSubgraph {
    let believed = |id: StatementId| g.statement(id).is_some_and(|s| s.label.is_true());
    let mut seen = BTreeSet::from([root]);
    let mut statements = vec![root];
    let mut steps = Vec::new();
    let mut queue = VecDeque::from([root]);
    while let Some(s) = queue.pop_front() {
        for rule in g.rules() {
            if rule.rule_type != RuleType::Entailment || rule.hypotheses[0] != s {
                continue;
            }
            if !rule.premises.iter().all(|&p| believed(p)) {
                continue;
            }
            steps.push(ExplanationStep { rule: rule.id, conclusion: s, premises: rule.premises.clone() });
            for &p in &rule.premises {
                if seen.insert(p) {
                    statements.push(p);
                    queue.push_back(p);
                }
            }
        }
    }
    ExplanationSubgraph { root, steps, statements }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub statement: StatementId,
    pub text: String,
    pub verdict: Label,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResolutionOutcome {
    pub outcome: ReasoningOutcome,
    pub queries: Vec<Query>,
    /// Rules still discarded when the loop stopped.
    pub remaining_conflicts: usize,
    pub budget_exhausted: bool,
    /// The answer source stopped answering before the loop finished.
    pub fallback: bool,
}

pub const DEFAULT_QUERY_BUDGET: usize = 5;

/// Query loop for conflict resolution with a person in the loop.
///
/// Each round asks about the lowest-confidence statement (ties by id) that
/// touches a discarded rule and has not been asked yet, pins the verdict as
/// a hard constraint and solves again. The loop ends when nothing is
/// discarded, the budget is spent, or every candidate has been asked.
#[derive(Clone, Debug)]
pub struct Resolver {
    graph: BeliefGraph,
    options: ReasonOptions,
    budget: usize,
    queries: Vec<Query>,
    outcome: ReasoningOutcome,
    pending: Option<StatementId>,
}

impl Resolver {
    pub fn start(g: &BeliefGraph, options: ReasonOptions, budget: usize) -> Result<Self, ReasonError> {
        let outcome = reason_with(g, &options)?;
        let mut resolver =
            Resolver { graph: g.clone(), options, budget, queries: Vec::new(), outcome, pending: None };
        resolver.pending = resolver.next_query();
        Ok(resolver)
    }

    pub fn pending_query(&self) -> Option<&StatementNode> {
        self.pending.and_then(|id| self.graph.statement(id))
    }

    pub fn outcome(&self) -> &ReasoningOutcome {
        &self.outcome
    }

    pub fn queries(&self) -> &[Query] {
        &self.queries
    }

    pub fn answer(&mut self, verdict: Label) -> Result<(), ReasonError> {
        let id = self.pending.ok_or(ReasonError::NoPendingQuery)?;
        let text = self.graph.statement(id).map(|s| s.text.clone()).unwrap_or_default();
        self.options.pins.push((id, verdict));
        self.outcome = reason_with(&self.graph, &self.options)?;
        self.queries.push(Query { statement: id, text, verdict });
        self.pending = self.next_query();
        Ok(())
    }

    pub fn finish(self) -> ResolutionOutcome {
        self.finish_with(false)
    }

    /// Ends the loop. `fallback` records that answers stopped arriving.
    pub fn finish_with(self, fallback: bool) -> ResolutionOutcome {
        let remaining_conflicts = self.outcome.discarded_rules.len();
        ResolutionOutcome {
            budget_exhausted: remaining_conflicts > 0 && self.queries.len() >= self.budget,
            remaining_conflicts,
            queries: self.queries,
            outcome: self.outcome,
            fallback,
        }
    }

    fn next_query(&self) -> Option<StatementId> {
        if self.queries.len() >= self.budget {
            return None;
        }
        let asked: BTreeSet<StatementId> = self.options.pins.iter().map(|&(id, _)| id).collect();
        self.outcome
            .discarded_rules
            .iter()
            .filter_map(|&r| self.graph.rule(r))
            .flat_map(|r| r.statements())
            .filter(|id| !asked.contains(id))
            .filter_map(|id| self.graph.statement(id))
            .min_by(|a, b| a.confidence.total_cmp(&b.confidence).then(a.id.cmp(&b.id)))
            .map(|s| s.id)
    }
}

/// Supplies verdicts for queried statements. `None` means no more answers
/// are available.
pub trait AnswerSource {
    fn verdict(&mut self, statement: &StatementNode) -> Option<Label>;
}

impl<F: FnMut(&StatementNode) -> Option<Label>> AnswerSource for F {
    fn verdict(&mut self, statement: &StatementNode) -> Option<Label> {
        self(statement)
    }
}

/// Runs the [`Resolver`] loop against `source`. If the source runs dry the
/// outcome reflects the verdicts given so far; with none given it equals
/// [`reason_with`].
pub fn resolve_interactive(
    g: &BeliefGraph,
    source: &mut dyn AnswerSource,
    options: ReasonOptions,
    budget: usize,
) -> Result<ResolutionOutcome, ReasonError> {
    let mut resolver = Resolver::start(g, options, budget)?;
    while let Some(statement) = resolver.pending_query() {
        match source.verdict(statement) {
            Some(verdict) => resolver.answer(verdict)?,
            None => {
                log::warn!("no answer available; keeping the current outcome");
                return Ok(resolver.finish_with(true));
            }
        }
    }
    Ok(resolver.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::{hypothesis, node};
    use crate::model::{total_cost, RuleNode};

    fn s(i: u32) -> StatementId {
        StatementId(i)
    }

    /// h0 (T) supported by 1 & 2 (T); 3 -> h0 with 3 false; h1 (F).
    fn supported() -> BeliefGraph {
        let statements =
            [hypothesis(0, true, 0.8), hypothesis(1, false, 0.6), node(2, true, 0.9), node(3, true, 0.9), node(4, false, 0.5)]
                .into_iter()
                .map(|n| (n.id, n))
                .collect();
        let rules = vec![
            RuleNode::entailment(RuleId(0), vec![s(2), s(3)], s(0), 1.0, 1.0),
            RuleNode::entailment(RuleId(1), vec![s(4)], s(0), 1.0, 1.0),
            RuleNode::mc_hard(RuleId(2), vec![s(0), s(1)]),
            RuleNode::mc_pairwise(RuleId(3), s(0), s(1), 0.98),
        ];
        BeliefGraph::new(statements, rules, vec![s(0), s(1)]).unwrap()
    }

    #[test]
    fn consistent_graph_is_a_fixpoint() {
        let g = supported();
        let out = reason(&g).unwrap();
        assert!(out.flipped.is_empty());
        assert!(out.discarded_rules.is_empty());
        assert_eq!(out.updated_graph, g);
        assert_eq!(out.predictions, vec![s(0)]);
        let e = extract_explanation(&out, s(0)).unwrap();
        assert_eq!(e.steps.len(), 1);
        assert_eq!(e.statements, vec![s(0), s(2), s(3)]);
        assert!(matches!(extract_explanation(&out, s(1)), Err(ReasonError::NotBelieved(_))));
        assert!(matches!(extract_explanation(&out, s(2)), Err(ReasonError::NotAHypothesis(_))));
    }

    #[test]
    fn pins_override_beliefs() {
        let g = supported();
        let options = ReasonOptions { pins: vec![(s(1), Label::True)], ..Default::default() };
        let out = reason_with(&g, &options).unwrap();
        assert_eq!(out.final_assignment.get(s(1)), Some(Label::True));
        let audit = total_cost(&g, &out.final_assignment).unwrap().finite().unwrap();
        assert!((audit - out.optimal_cost).abs() < 1e-9);
    }

    #[test]
    fn zero_budget_asks_nothing() {
        let g = supported();
        let mut never = |_: &StatementNode| -> Option<Label> { panic!("no query expected") };
        let r = resolve_interactive(&g, &mut never, ReasonOptions::default(), 0).unwrap();
        assert!(r.queries.is_empty());
        assert_eq!(r.outcome, reason(&g).unwrap());
    }
}
