use std::collections::{BTreeMap, BTreeSet};

use belief_core::document::{GraphDocument, OutcomeDocument, Provenance};
use belief_core::maxsat::wcnf::{parse_wcnf, to_wcnf};
use belief_core::metrics::{mc_accuracy, tau, TauScope};
use belief_core::model::{assignment_weight, total_cost, RuleWeight};
use belief_core::synth::{synthetic_graph, SynthConfig};
use belief_core::{encode, reason, solve, Assignment, BeliefGraph, CalibrationConfig, Label, SolverConfig};
use proptest::prelude::*;

fn small() -> SynthConfig {
    SynthConfig { max_statements: 40, max_rules: 12, ..Default::default() }
}

fn graph(seed: u64, cfg: &SynthConfig) -> BeliefGraph {
    synthetic_graph(seed, cfg, &CalibrationConfig::default()).graph
}

fn flips_from(g: &BeliefGraph, mask: u64) -> Assignment {
    let mut a = g.labels();
    for (i, s) in g.statements().enumerate() {
        if mask >> (i % 64) & 1 == 1 {
            a.set(s.id, s.label.flipped());
        }
    }
    a
}

fn scaled(g: &BeliefGraph, c: f64) -> BeliefGraph {
    let (mut statements, mut rules, hypotheses) = g.clone().into_parts();
    for s in statements.values_mut() {
        s.confidence *= c;
    }
    for r in &mut rules {
        if let RuleWeight::Soft(w) = r.weight {
            r.weight = RuleWeight::Soft(w * c);
        }
    }
    BeliefGraph::new(statements, rules, hypotheses).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn weight_is_exp_of_negative_cost(seed in any::<u64>(), mask in any::<u64>()) {
        let g = graph(seed, &small());
        let a = flips_from(&g, mask);
        let w = assignment_weight(&g, &a).unwrap();
        match total_cost(&g, &a).unwrap().finite() {
            Some(c) => prop_assert!((w - (-c).exp()).abs() <= 1e-12 * w.max(1e-300)),
            None => prop_assert_eq!(w, 0.0),
        }
    }

    #[test]
    fn rule_order_does_not_matter(seed in any::<u64>(), rotate in 0usize..50) {
        let g = graph(seed, &small());
        let (statements, mut rules, hypotheses) = g.clone().into_parts();
        let n = rules.len();
        rules.rotate_left(rotate % n);
        rules.reverse();
        let shuffled = BeliefGraph::new(statements, rules, hypotheses).unwrap();
        let a = reason(&g).unwrap();
        let b = reason(&shuffled).unwrap();
        prop_assert_eq!(a.final_assignment, b.final_assignment);
        prop_assert_eq!(a.discarded_rules, b.discarded_rules);
    }

    #[test]
    fn reasoning_repairs_and_never_costs_more(seed in any::<u64>()) {
        let g = graph(seed, &small());
        let out = reason(&g).unwrap();
        prop_assert_eq!(tau(&out.updated_graph).violated_rules, 0);
        let before = total_cost(&g, &g.labels()).unwrap().finite().unwrap();
        let after = total_cost(&g, &out.final_assignment).unwrap().finite().unwrap();
        prop_assert!(after <= before + 1e-9);
        prop_assert!((after - out.optimal_cost).abs() <= 1e-9);
        // A consistent graph is a fixpoint.
        let again = reason(&out.updated_graph).unwrap();
        prop_assert!(again.flipped.is_empty() && again.discarded_rules.is_empty());
    }

    #[test]
    fn predictions_survive_uniform_scaling(seed in any::<u64>(), c in 0.2f64..1.0) {
        let g = graph(seed, &small());
        let a = reason(&g).unwrap();
        let b = reason(&scaled(&g, c)).unwrap();
        prop_assert_eq!(a.predictions, b.predictions);
        prop_assert!((a.optimal_cost * c - b.optimal_cost).abs() <= 1e-9);
    }

    #[test]
    fn wcnf_export_preserves_the_optimum(seed in any::<u64>()) {
        let g = graph(seed, &small());
        let cs = encode(&g);
        let parsed = parse_wcnf(&to_wcnf(&cs)).unwrap();
        prop_assert_eq!(parsed.variables(), cs.variables());
        prop_assert_eq!(parsed.clauses().len(), cs.clauses().len());
        let original = solve(&cs, &SolverConfig::default()).unwrap();
        let exported = solve(&parsed, &SolverConfig::default()).unwrap();
        let slack = 1e-6 * cs.clauses().len() as f64;
        let reevaluated = cs.cost_of(&exported.assignment).finite().unwrap();
        prop_assert!((reevaluated - original.optimal_cost).abs() <= slack);
    }

    #[test]
    fn documents_round_trip(seed in any::<u64>()) {
        let g = graph(seed, &small());
        let doc = GraphDocument::from_graph(&g, Provenance::default());
        let text = doc.to_json();
        let back = GraphDocument::from_json(&text).unwrap();
        prop_assert_eq!(back.to_json(), text);
        prop_assert_eq!(back.to_graph().unwrap(), g.clone());

        let out = reason(&g).unwrap();
        let od = OutcomeDocument::new(&doc, &out, &BTreeSet::new(), TauScope::AllRules).unwrap();
        let od_text = od.to_json();
        prop_assert_eq!(OutcomeDocument::from_json(&od_text).unwrap().to_json(), od_text);
        prop_assert_eq!(od.summary.tau_after, 0.0);
    }
}

#[test]
fn accuracy_cases() {
    assert_eq!(mc_accuracy(&BTreeSet::from([2]), 2, 4).unwrap(), 1.0);
    assert_eq!(mc_accuracy(&BTreeSet::from([0, 1, 2]), 1, 4).unwrap(), 1.0 / 3.0);
    assert_eq!(mc_accuracy(&BTreeSet::from([0, 1]), 3, 4).unwrap(), 0.0);
    assert_eq!(mc_accuracy(&BTreeSet::new(), 3, 4).unwrap(), 0.25);
    assert!(mc_accuracy(&BTreeSet::new(), 4, 4).is_err());
    assert!(mc_accuracy(&BTreeSet::from([7]), 0, 4).is_err());
}

#[test]
fn synthetic_graphs_start_inconsistent() {
    for seed in 0..20 {
        let sg = synthetic_graph(seed, &SynthConfig::default(), &CalibrationConfig::default());
        let r = tau(&sg.graph);
        assert!(r.tau > 0.0);
        assert_eq!(r.tau, sg.expected_tau);
        assert_eq!(r.violated_rules, sg.violated.len());
        assert!(sg.graph.statement_count() <= 400 && sg.graph.rules().len() <= 90);
    }
}

#[test]
fn fully_pinned_instance_has_one_answer() {
    let g = graph(7, &small());
    let labels: BTreeMap<_, _> = g.statements().map(|s| (s.id, Label::True)).collect();
    let mut cs = encode(&g);
    for (&id, &l) in &labels {
        cs.pin(id, l).unwrap();
    }
    let r = solve(&cs, &SolverConfig::default()).unwrap();
    assert!(r.assignment.iter().all(|(_, l)| l == Label::True) || r.optimal_cost.is_infinite());
}
