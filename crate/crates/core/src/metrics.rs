//! Consistency and accuracy measurements, rule-type ablations and dataset
//! evaluation.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::CalibrationConfig;
use crate::construction::{generate_graph_with, BeliefOracle, BuildOptions, HypothesisSet};
use crate::maxsat::SolverConfig;
use crate::model::{Assignment, BeliefGraph, ModelError, RuleType};
use crate::reasoner::{reason_with, ReasonError, ReasonOptions, ReasoningOutcome};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("gold index {gold} out of range for {k} options")]
    GoldOutOfRange { gold: usize, k: usize },
    #[error("predicted index {index} out of range for {k} options")]
    PredictionOutOfRange { index: usize, k: usize },
    #[error("at least one rule class must be masked")]
    NothingMasked,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Reason(#[from] ReasonError),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauScope {
    /// Every clause of every rule.
    #[default]
    AllRules,
    EntailmentOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub applicable_rules: usize,
    pub violated_rules: usize,
    pub tau: f64,
    pub self_consistency: f64,
}

/// Conditional violation rate of the graph's own labels.
pub fn tau(g: &BeliefGraph) -> ConsistencyReport {
    tau_of(g, &g.labels(), TauScope::AllRules).expect("a graph's labels cover it")
}

/// Conditional violation rate of `a` over the rules of `g`.
///
/// Rules are counted per clause, so a negation pair contributes two
/// entries. A clause is applicable when all its negated statements are
/// believed true and violated when, in addition, none of its positive
/// statements is. With nothing applicable the rate is 0.
pub fn tau_of(g: &BeliefGraph, a: &Assignment, scope: TauScope) -> Result<ConsistencyReport, ModelError> {
    let mut applicable = 0;
    let mut violated = 0;
    for rule in g.rules() {
        if scope == TauScope::EntailmentOnly && rule.rule_type != RuleType::Entailment {
            continue;
        }
        for clause in rule.clauses() {
            if clause.applicable(a)? {
                applicable += 1;
                if !clause.satisfied(a)? {
                    violated += 1;
                }
            }
        }
    }
    let tau = if applicable == 0 { 0.0 } else { violated as f64 / applicable as f64 };
    Ok(ConsistencyReport { applicable_rules: applicable, violated_rules: violated, tau, self_consistency: 1.0 - tau })
}

/// 1 for exactly the gold answer, 1/N for N answers including it, 1/k for
/// no answer, 0 otherwise.
pub fn mc_accuracy(predicted: &BTreeSet<usize>, gold: usize, k: usize) -> Result<f64, MetricsError> {
    if gold >= k {
        return Err(MetricsError::GoldOutOfRange { gold, k });
    }
    if let Some(&index) = predicted.iter().find(|&&i| i >= k) {
        return Err(MetricsError::PredictionOutOfRange { index, k });
    }
    Ok(if predicted.is_empty() {
        1.0 / k as f64
    } else if predicted.contains(&gold) {
        1.0 / predicted.len() as f64
    } else {
        0.0
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleClass {
    Entailment,
    Xor,
    /// Both the hard and the pairwise multiple-choice rules.
    Mc,
}

impl RuleClass {
    pub fn of(rule_type: RuleType) -> RuleClass {
        match rule_type {
            RuleType::Entailment => RuleClass::Entailment,
            RuleType::XorPair => RuleClass::Xor,
            RuleType::McHard | RuleType::McPairwise => RuleClass::Mc,
        }
    }
}

impl std::str::FromStr for RuleClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "entailment" => Ok(RuleClass::Entailment),
            "xor" => Ok(RuleClass::Xor),
            "mc" => Ok(RuleClass::Mc),
            other => Err(format!("unknown rule class `{other}` (expected entailment, xor or mc)")),
        }
    }
}

/// `g` without the rules of the masked classes.
pub fn ablate(g: &BeliefGraph, masked: &BTreeSet<RuleClass>) -> Result<BeliefGraph, MetricsError> {
    if masked.is_empty() {
        return Err(MetricsError::NothingMasked);
    }
    let rules = g.rules().iter().filter(|r| !masked.contains(&RuleClass::of(r.rule_type))).cloned().collect();
    Ok(g.with_rules(rules)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationOutcome {
    /// Reasoning over the ablated graph.
    pub outcome: ReasoningOutcome,
    /// Its final beliefs measured against every rule of the original graph.
    pub consistency: ConsistencyReport,
}

pub fn reason_ablated(
    g: &BeliefGraph,
    masked: &BTreeSet<RuleClass>,
    options: &ReasonOptions,
    scope: TauScope,
) -> Result<AblationOutcome, MetricsError> {
    let outcome = reason_with(&ablate(g, masked)?, options)?;
    let consistency = tau_of(g, &outcome.final_assignment, scope)?;
    Ok(AblationOutcome { outcome, consistency })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRecord {
    pub question_id: Option<String>,
    pub predicted: BTreeSet<usize>,
    pub gold: usize,
    pub num_options: usize,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub calibration: CalibrationConfig,
    pub solver: SolverConfig,
    pub max_statements: usize,
    pub workers: usize,
    pub tau_scope: TauScope,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            calibration: CalibrationConfig::default(),
            solver: SolverConfig::default(),
            max_statements: BuildOptions::default().max_statements,
            workers: 1,
            tau_scope: TauScope::AllRules,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionReport {
    pub index: usize,
    pub question_id: Option<String>,
    pub statements: usize,
    pub rules: usize,
    /// Initial labels on the constructed graph.
    pub before: ConsistencyReport,
    /// Final labels on the updated graph.
    pub after: ConsistencyReport,
    /// Final labels on the constructed graph, discarded rules included.
    pub after_full_graph: ConsistencyReport,
    pub flips: usize,
    pub discarded: usize,
    pub baseline: Option<AccuracyRecord>,
    pub reasoned: Option<AccuracyRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionFailure {
    pub index: usize,
    pub question_id: Option<String>,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub questions: Vec<QuestionReport>,
    pub failures: Vec<QuestionFailure>,
    pub mean_consistency_before: f64,
    pub mean_consistency_after: f64,
    pub mean_consistency_after_full_graph: f64,
    /// Over questions with a gold answer.
    pub mean_accuracy_baseline: Option<f64>,
    pub mean_accuracy_after: Option<f64>,
}

/// Metrics of one already-built graph. The baseline answer is the
/// hypothesis with the highest raw score, ties to the lowest index.
pub fn evaluate_graph(
    index: usize,
    g: &BeliefGraph,
    gold: Option<usize>,
    question_id: Option<String>,
    cfg: &EvalConfig,
) -> Result<QuestionReport, MetricsError> {
    let scores: Vec<f64> =
        g.hypotheses().iter().map(|&h| g.statement(h).expect("validated hypothesis").raw_score).collect();
    let baseline = accuracy_record(question_id.clone(), &BTreeSet::from([argmax(&scores)]), gold, scores.len())?;
    report(index, g, gold, question_id, baseline, cfg)
}

fn report(
    index: usize,
    g: &BeliefGraph,
    gold: Option<usize>,
    question_id: Option<String>,
    baseline: Option<AccuracyRecord>,
    cfg: &EvalConfig,
) -> Result<QuestionReport, MetricsError> {
    let options = ReasonOptions { solver: cfg.solver.clone(), pins: Vec::new() };
    let outcome = reason_with(g, &options)?;
    let predicted: BTreeSet<usize> = outcome
        .predictions
        .iter()
        .map(|p| g.hypotheses().iter().position(|h| h == p).expect("predictions are hypotheses"))
        .collect();
    let reasoned = accuracy_record(question_id.clone(), &predicted, gold, g.hypotheses().len())?;
    Ok(QuestionReport {
        index,
        question_id,
        statements: g.statement_count(),
        rules: g.rules().len(),
        before: tau_of(g, &g.labels(), cfg.tau_scope)?,
        after: tau_of(&outcome.updated_graph, &outcome.final_assignment, cfg.tau_scope)?,
        after_full_graph: tau_of(g, &outcome.final_assignment, cfg.tau_scope)?,
        flips: outcome.flipped.len(),
        discarded: outcome.discarded_rules.len(),
        baseline,
        reasoned,
    })
}

fn accuracy_record(
    question_id: Option<String>,
    predicted: &BTreeSet<usize>,
    gold: Option<usize>,
    k: usize,
) -> Result<Option<AccuracyRecord>, MetricsError> {
    let Some(gold) = gold else { return Ok(None) };
    let score = mc_accuracy(predicted, gold, k)?;
    Ok(Some(AccuracyRecord { question_id, predicted: predicted.clone(), gold, num_options: k, score }))
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Builds, reasons over and scores every question, using up to
/// `cfg.workers` threads. Failed questions are logged and listed in the
/// report, and excluded from the means.
pub fn evaluate_dataset<O: BeliefOracle + ?Sized>(
    questions: &[HypothesisSet],
    oracle: &O,
    cfg: &EvalConfig,
) -> Result<DatasetReport, MetricsError> {
    let run = |(index, q): (usize, &HypothesisSet)| -> Result<QuestionReport, String> {
        let scores = q
            .hypotheses
            .iter()
            .map(|h| oracle.score_statement(h))
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| e.to_string())?;
        let baseline = accuracy_record(
            q.question_id.clone(),
            &BTreeSet::from([argmax(&scores)]),
            q.gold_index,
            q.hypotheses.len(),
        )
        .map_err(|e| e.to_string())?;
        let options = BuildOptions { max_statements: cfg.max_statements };
        let g = generate_graph_with(q, oracle, &cfg.calibration, &options).map_err(|e| e.to_string())?;
        report(index, &g, q.gold_index, q.question_id.clone(), baseline, cfg).map_err(|e| e.to_string())
    };
    let results = in_pool(cfg.workers, || questions.par_iter().enumerate().map(run).collect::<Vec<_>>())?;
    Ok(collect(questions.iter().map(|q| q.question_id.clone()).collect(), results))
}

/// [`evaluate_graph`] over a batch of graphs with optional gold answers.
pub fn evaluate_graphs(graphs: &[(BeliefGraph, Option<usize>)], cfg: &EvalConfig) -> Result<DatasetReport, MetricsError> {
    let results = in_pool(cfg.workers, || {
        graphs
            .par_iter()
            .enumerate()
            .map(|(i, (g, gold))| evaluate_graph(i, g, *gold, None, cfg).map_err(|e| e.to_string()))
            .collect::<Vec<_>>()
    })?;
    Ok(collect(vec![None; graphs.len()], results))
}

fn in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, MetricsError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| MetricsError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

fn collect(ids: Vec<Option<String>>, results: Vec<Result<QuestionReport, String>>) -> DatasetReport {
    let mut questions = Vec::new();
    let mut failures = Vec::new();
    for (index, (result, question_id)) in results.into_iter().zip(ids).enumerate() {
        match result {
            Ok(r) => questions.push(r),
            Err(error) => {
                log::warn!("question {index} failed and is excluded: {error}");
                failures.push(QuestionFailure { index, question_id, error });
            }
        }
    }
    let mean = |values: Vec<f64>| {
        if values.is_empty() {
            None
        } else {
            Some(values.iter().sum::<f64>() / values.len() as f64)
        }
    };
    let consistency = |f: fn(&QuestionReport) -> f64| mean(questions.iter().map(f).collect()).unwrap_or(0.0);
    DatasetReport {
        mean_consistency_before: consistency(|q| q.before.self_consistency),
        mean_consistency_after: consistency(|q| q.after.self_consistency),
        mean_consistency_after_full_graph: consistency(|q| q.after_full_graph.self_consistency),
        mean_accuracy_baseline: mean(questions.iter().filter_map(|q| q.baseline.as_ref().map(|a| a.score)).collect()),
        mean_accuracy_after: mean(questions.iter().filter_map(|q| q.reasoned.as_ref().map(|a| a.score)).collect()),
        questions,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::{hypothesis, node};
    use crate::model::{RuleId, RuleNode, StatementId};

    fn s(i: u32) -> StatementId {
        StatementId(i)
    }

    #[test]
    fn tau_worked_example() {
        // a&b -> c with a, b true and c false; d -> e both true; f -> g with f false
        let labels = [true, true, false, true, true, false, false];
        let mut statements: std::collections::BTreeMap<_, _> =
            labels.iter().enumerate().map(|(i, &l)| (s(i as u32 + 1), node(i as u32 + 1, l, 0.9))).collect();
        statements.insert(s(0), hypothesis(0, true, 0.9));
        let rules = vec![
            RuleNode::entailment(RuleId(0), vec![s(1), s(2)], s(3), 1.0, 1.0),
            RuleNode::entailment(RuleId(1), vec![s(4)], s(5), 1.0, 1.0),
            RuleNode::entailment(RuleId(2), vec![s(6)], s(7), 1.0, 1.0),
        ];
        let g = BeliefGraph::new(statements, rules, vec![s(0)]).unwrap();
        let r = tau(&g);
        assert_eq!((r.applicable_rules, r.violated_rules), (2, 1));
        assert_eq!(r.tau, 0.5);
        assert_eq!(r.self_consistency, 0.5);
    }

    #[test]
    fn accuracy_cases() {
        assert_eq!(mc_accuracy(&BTreeSet::from([2]), 2, 4).unwrap(), 1.0);
        assert_eq!(mc_accuracy(&BTreeSet::from([1, 2]), 2, 4).unwrap(), 0.5);
        assert_eq!(mc_accuracy(&BTreeSet::new(), 2, 4).unwrap(), 0.25);
        assert_eq!(mc_accuracy(&BTreeSet::from([1]), 2, 4).unwrap(), 0.0);
        assert!(mc_accuracy(&BTreeSet::new(), 4, 4).is_err());
        assert!(mc_accuracy(&BTreeSet::from([5]), 1, 4).is_err());
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.2, 0.7, 0.7]), 1);
    }
}
