//! Weighted partial MaxSAT encoding of a belief graph and its exact solution.
//!
//! Each statement contributes a soft unit clause asserting its initial
//! label, weighted by its confidence. Each soft rule contributes its clauses
//! at the rule's confidence and the hard multiple-choice rule contributes a
//! hard clause. A minimum-weight assignment of this instance is a most
//! probable explanation of the factor graph.
//!
//! Among equal-cost optima (costs within [`COST_EPSILON`]) the solvers pick
//! the assignment with the fewest flips from the initial labels, and among
//! those the one whose flip vector, read in variable order, is
//! lexicographically smallest. Earlier variables are therefore the last to
//! be flipped.

mod branch_bound;
mod brute_force;
pub mod wcnf;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::model::{Assignment, BeliefGraph, Cost, Label, Literal, RuleWeight, StatementId};

pub use branch_bound::solve;
pub use brute_force::{brute_force_solve, BRUTE_FORCE_MAX_VARIABLES};

/// Absolute tolerance for cost comparisons.
pub const COST_EPSILON: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ClauseWeight {
    Soft(f64),
    Hard,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedClause {
    literals: Vec<Literal>,
    weight: ClauseWeight,
}

impl WeightedClause {
    /// Drops repeated literals. Fails on empty, tautological or
    /// non-positive-weight clauses.
    pub fn new(literals: Vec<Literal>, weight: ClauseWeight) -> Result<Self, SolveError> {
        if literals.is_empty() {
            return Err(SolveError::InvalidClause("empty clause".into()));
        }
        if let ClauseWeight::Soft(w) = weight {
            if !(w.is_finite() && w > 0.0) {
                return Err(SolveError::InvalidClause(format!("soft weight {w} is not positive")));
            }
        }
        let mut seen: BTreeMap<StatementId, bool> = BTreeMap::new();
        let mut kept = Vec::with_capacity(literals.len());
        for lit in literals {
            match seen.get(&lit.var) {
                Some(&p) if p == lit.positive => continue,
                Some(_) => return Err(SolveError::InvalidClause(format!("tautology on {}", lit.var))),
                None => {
                    seen.insert(lit.var, lit.positive);
                    kept.push(lit);
                }
            }
        }
        Ok(WeightedClause { literals: kept, weight })
    }

    pub fn soft(literals: Vec<Literal>, weight: f64) -> Result<Self, SolveError> {
        WeightedClause::new(literals, ClauseWeight::Soft(weight))
    }

    pub fn hard(literals: Vec<Literal>) -> Result<Self, SolveError> {
        WeightedClause::new(literals, ClauseWeight::Hard)
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn weight(&self) -> ClauseWeight {
        self.weight
    }

    pub fn is_hard(&self) -> bool {
        matches!(self.weight, ClauseWeight::Hard)
    }

    fn satisfied_by(&self, a: &Assignment) -> bool {
        self.literals.iter().any(|l| a.get(l.var).is_some_and(|v| l.satisfied_by(v)))
    }
}

/// A variable with the label flips are counted against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Variable {
    pub id: StatementId,
    pub initial: Label,
}

/// Clauses over an ordered variable list. The order drives both the
/// branching order and the tie-break.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedClauseSet {
    variables: Vec<Variable>,
    clauses: Vec<WeightedClause>,
}

impl WeightedClauseSet {
    pub fn new(variables: Vec<Variable>, clauses: Vec<WeightedClause>) -> Result<Self, SolveError> {
        let mut ids = BTreeSet::new();
        for v in &variables {
            if !ids.insert(v.id) {
                return Err(SolveError::DuplicateVariable(v.id));
            }
        }
        for clause in &clauses {
            if let Some(lit) = clause.literals.iter().find(|l| !ids.contains(&l.var)) {
                return Err(SolveError::UnknownVariable(lit.var));
            }
        }
        Ok(WeightedClauseSet { variables, clauses })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn clauses(&self) -> &[WeightedClause] {
        &self.clauses
    }

    pub fn push(&mut self, clause: WeightedClause) -> Result<(), SolveError> {
        if let Some(lit) = clause.literals.iter().find(|l| !self.variables.iter().any(|v| v.id == l.var)) {
            return Err(SolveError::UnknownVariable(lit.var));
        }
        self.clauses.push(clause);
        Ok(())
    }

    /// Forces `id` to `label` with a hard unit clause.
    pub fn pin(&mut self, id: StatementId, label: Label) -> Result<(), SolveError> {
        let lit = Literal { var: id, positive: label.is_true() };
        self.push(WeightedClause::hard(vec![lit])?)
    }

    pub fn initial_assignment(&self) -> Assignment {
        self.variables.iter().map(|v| (v.id, v.initial)).collect()
    }

    /// Summed weight of falsified soft clauses, in clause order.
    pub fn cost_of(&self, a: &Assignment) -> Cost {
        let mut total = 0.0;
        for clause in &self.clauses {
            if clause.satisfied_by(a) {
                continue;
            }
            match clause.weight {
                ClauseWeight::Soft(w) => total += w,
                ClauseWeight::Hard => return Cost::Infeasible,
            }
        }
        Cost::Finite(total)
    }

    pub fn flips(&self, a: &Assignment) -> usize {
        self.variables.iter().filter(|v| a.get(v.id) != Some(v.initial)).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    /// The optimum; the initial labels when infeasible.
    pub assignment: Assignment,
    /// Summed weight of violated soft clauses; infinite when infeasible.
    pub optimal_cost: f64,
    pub status: SolveStatus,
    pub nodes_explored: u64,
}

impl SolveResult {
    pub(crate) fn infeasible(cs: &WeightedClauseSet, nodes_explored: u64) -> Self {
        SolveResult {
            assignment: cs.initial_assignment(),
            optimal_cost: f64::INFINITY,
            status: SolveStatus::Infeasible,
            nodes_explored,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_variables: usize,
    pub max_nodes: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { max_variables: 5000, max_nodes: 20_000_000 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("{count} variables exceed the solver limit of {limit}")]
    TooManyVariables { count: usize, limit: usize },
    #[error("search exceeded the node limit of {limit}")]
    NodeLimit { limit: u64 },
    #[error("invalid clause: {0}")]
    InvalidClause(String),
    #[error("clause references unknown variable {0}")]
    UnknownVariable(StatementId),
    #[error("variable {0} listed twice")]
    DuplicateVariable(StatementId),
}

/// Weighted MaxSAT instance of `g`.
///
/// Variables are ordered hypotheses first, then by descending statement
/// confidence, then by id. Zero-weight clauses are omitted since they never
/// contribute cost.
pub fn encode(g: &BeliefGraph) -> WeightedClauseSet {
    let hypotheses: BTreeSet<_> = g.hypotheses().iter().copied().collect();
    let mut rest: Vec<_> = g.statements().filter(|s| !hypotheses.contains(&s.id)).collect();
    rest.sort_by(|a, b| b.confidence.total_cmp(&a.confidence).then(a.id.cmp(&b.id)));
    let variables = g
        .hypotheses()
        .iter()
        .map(|&h| g.statement(h).expect("validated hypothesis"))
        .chain(rest)
        .map(|s| Variable { id: s.id, initial: s.label })
        .collect();

    let mut clauses = Vec::new();
    for s in g.statements() {
        if s.confidence > 0.0 {
            let lit = Literal { var: s.id, positive: s.label.is_true() };
            clauses.push(WeightedClause::soft(vec![lit], s.confidence).expect("unit clause"));
        }
    }
    for rule in g.rules() {
        let weight = match rule.weight {
            RuleWeight::Soft(w) if w > 0.0 => ClauseWeight::Soft(w),
            RuleWeight::Soft(_) => continue,
            RuleWeight::Hard => ClauseWeight::Hard,
        };
        for clause in rule.clauses() {
            clauses.push(WeightedClause::new(clause.literals, weight).expect("rules are validated"));
        }
    }
    WeightedClauseSet::new(variables, clauses).expect("graph statements cover all literals")
}

/// Comparison shared by both solvers: is `(cost, flips)` strictly better
/// than the incumbent? Equal flips never win, so the earliest candidate in
/// flip-vector order is kept.
pub(crate) fn improves(cost: f64, flips: usize, best: Option<(f64, usize)>) -> bool {
    match best {
        None => true,
        Some((best_cost, best_flips)) => {
            cost < best_cost - COST_EPSILON || ((cost - best_cost).abs() <= COST_EPSILON && flips < best_flips)
        }
    }
}
