//! Exhaustive reference solver.
//!
//! Enumerates every flip vector in increasing order, with the first variable
//! as the most significant bit, and keeps the first candidate that strictly
//! improves on the incumbent. This realizes the documented tie-break
//! directly, so it doubles as the oracle the branch-and-bound solver is
//! checked against.

use super::{improves, ClauseWeight, SolveError, SolveResult, SolveStatus, WeightedClauseSet};
use crate::model::{Assignment, Label};

pub const BRUTE_FORCE_MAX_VARIABLES: usize = 22;

struct MaskClause {
    pos: u32,
    neg: u32,
    weight: Option<f64>,
}

pub fn brute_force_solve(cs: &WeightedClauseSet) -> Result<SolveResult, SolveError> {
    let n = cs.variables().len();
    if n > BRUTE_FORCE_MAX_VARIABLES {
        return Err(SolveError::TooManyVariables { count: n, limit: BRUTE_FORCE_MAX_VARIABLES });
    }
    let bit = |i: usize| 1u32 << (n - 1 - i);
    let index_of = |id| cs.variables().iter().position(|v| v.id == id).expect("validated clause set");

    let initial = cs
        .variables()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.initial.is_true())
        .fold(0u32, |m, (i, _)| m | bit(i));
    let clauses: Vec<MaskClause> = cs
        .clauses()
        .iter()
        .map(|c| {
            let (mut pos, mut neg) = (0, 0);
            for lit in c.literals() {
                let b = bit(index_of(lit.var));
                if lit.positive {
                    pos |= b;
                } else {
                    neg |= b;
                }
            }
            let weight = match c.weight() {
                ClauseWeight::Soft(w) => Some(w),
                ClauseWeight::Hard => None,
            };
            MaskClause { pos, neg, weight }
        })
        .collect();

    let mut best: Option<(f64, usize, u32)> = None;
    let total = 1u64 << n;
    'candidates: for flip in 0..total {
        let flip = flip as u32;
        let value = flip ^ initial;
        let mut cost = 0.0;
        for c in &clauses {
            if value & c.pos != 0 || !value & c.neg != 0 {
                continue;
            }
            match c.weight {
                Some(w) => cost += w,
                None => continue 'candidates,
            }
        }
        let flips = flip.count_ones() as usize;
        if improves(cost, flips, best.map(|(c, f, _)| (c, f))) {
            best = Some((cost, flips, value));
        }
    }

    Ok(match best {
        None => SolveResult::infeasible(cs, total),
        Some((cost, _, value)) => {
            let assignment: Assignment = cs
                .variables()
                .iter()
                .enumerate()
                .map(|(i, v)| (v.id, Label::from(value & bit(i) != 0)))
                .collect();
            SolveResult { assignment, optimal_cost: cost, status: SolveStatus::Optimal, nodes_explored: total }
        }
    })
}
