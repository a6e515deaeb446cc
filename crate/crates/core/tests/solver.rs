use belief_core::calibration::CalibrationConfig;
use belief_core::maxsat::{
    brute_force_solve, encode, solve, SolveStatus, SolverConfig, Variable, WeightedClause, WeightedClauseSet,
};
use belief_core::model::{total_cost, Label, Literal, StatementId};
use belief_core::synth::{random_clause_set, synthetic_graph, SynthConfig};
use proptest::prelude::*;

fn agree(cs: &WeightedClauseSet) {
    let fast = solve(cs, &SolverConfig::default()).unwrap();
    let slow = brute_force_solve(cs).unwrap();
    assert_eq!(fast.status, slow.status);
    if slow.status == SolveStatus::Optimal {
        assert!((fast.optimal_cost - slow.optimal_cost).abs() <= 1e-9, "{} vs {}", fast.optimal_cost, slow.optimal_cost);
        assert_eq!(fast.assignment, slow.assignment);
    }
}

#[test]
fn seeded_instances_match_exhaustive_search() {
    for seed in 0..300 {
        let n = 8 + (seed as usize % 11);
        agree(&random_clause_set(seed, n));
    }
}

#[test]
fn synthetic_graphs_solve_quickly() {
    let cfg = CalibrationConfig::default();
    for seed in 0..50 {
        let s = synthetic_graph(seed, &SynthConfig::default(), &cfg);
        let cs = encode(&s.graph);
        let r = solve(&cs, &SolverConfig::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        let audit = total_cost(&s.graph, &r.assignment).unwrap().finite().unwrap();
        assert!((audit - r.optimal_cost).abs() <= 1e-9);
        assert!(r.nodes_explored < 2_000_000, "seed {seed}: {} nodes", r.nodes_explored);
    }
}

fn arb_instance() -> impl Strategy<Value = WeightedClauseSet> {
    (1usize..=10).prop_flat_map(|n| {
        let initial = proptest::collection::vec(any::<bool>(), n);
        let lit = (0..n, any::<bool>());
        let clause = (proptest::collection::vec(lit, 1..=3), prop_oneof![4 => (1u32..=12).prop_map(Some), 1 => Just(None)]);
        (initial, proptest::collection::vec(clause, 0..=2 * n))
    })
    .prop_map(|(initial, raw)| {
        let vars = initial
            .iter()
            .enumerate()
            .map(|(i, &b)| Variable { id: StatementId(i as u32), initial: Label::from(b) })
            .collect();
        let clauses = raw
            .into_iter()
            .filter_map(|(lits, w)| {
                let lits = lits.into_iter().map(|(v, p)| Literal { var: StatementId(v as u32), positive: p }).collect();
                match w {
                    Some(w) => WeightedClause::soft(lits, f64::from(w) * 0.125).ok(),
                    None => WeightedClause::hard(lits).ok(),
                }
            })
            .collect();
        WeightedClauseSet::new(vars, clauses).unwrap()
    })
}

proptest! {
    #[test]
    fn branch_and_bound_equals_brute_force(cs in arb_instance()) {
        agree(&cs);
    }

    #[test]
    fn solving_is_deterministic(cs in arb_instance()) {
        let a = solve(&cs, &SolverConfig::default()).unwrap();
        let b = solve(&cs, &SolverConfig::default()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn extra_soft_clause_never_lowers_the_optimum(cs in arb_instance(), v in 0u32..10, p: bool, w in 1u32..20) {
        let base = solve(&cs, &SolverConfig::default()).unwrap();
        prop_assume!(base.status == SolveStatus::Optimal);
        let var = StatementId(v % cs.variables().len() as u32);
        let mut more = cs.clone();
        more.push(WeightedClause::soft(vec![Literal { var, positive: p }], f64::from(w) * 0.1).unwrap()).unwrap();
        let next = solve(&more, &SolverConfig::default()).unwrap();
        prop_assert!(next.optimal_cost >= base.optimal_cost - 1e-9);
    }
}
