//! Weighted CNF text export, for cross-checking with external MaxSAT
//! solvers.
//!
//! The layout is the classic (pre-2022) WCNF format:
//!
//! ```text
//! c weighted CNF export
//! c weights scaled by 1000000
//! c var 1 = s0 T
//! c var 2 = s3 F
//! p wcnf <variables> <clauses> <top>
//! <weight> <literal> ... 0
//! ```
//!
//! Variables are numbered from 1 in clause-set order and each `c var` line
//! maps a number back to its statement id and initial label. Soft weights are
//! `max(1, round(w * 1e6))`. `top` is one more than the sum of all scaled
//! soft weights and is also the weight written on every hard clause. Lines
//! end in `\n`, and clauses appear in clause-set order.

use std::fmt::Write as _;

use thiserror::Error;

use super::{ClauseWeight, Variable, WeightedClause, WeightedClauseSet};
use crate::model::{Label, Literal, StatementId};

pub const WEIGHT_SCALE: f64 = 1e6;

fn scaled(w: f64) -> u64 {
    ((w * WEIGHT_SCALE).round() as u64).max(1)
}

pub fn to_wcnf(cs: &WeightedClauseSet) -> String {
    let top: u64 = 1 + cs
        .clauses()
        .iter()
        .filter_map(|c| match c.weight() {
            ClauseWeight::Soft(w) => Some(scaled(w)),
            ClauseWeight::Hard => None,
        })
        .sum::<u64>();
    let number = |id: StatementId| cs.variables().iter().position(|v| v.id == id).expect("validated") + 1;

    let mut out = String::new();
    out.push_str("c weighted CNF export\n");
    out.push_str("c weights scaled by 1000000\n");
    for (i, v) in cs.variables().iter().enumerate() {
        let _ = writeln!(out, "c var {} = {} {}", i + 1, v.id, v.initial);
    }
    let _ = writeln!(out, "p wcnf {} {} {}", cs.variables().len(), cs.clauses().len(), top);
    for clause in cs.clauses() {
        let weight = match clause.weight() {
            ClauseWeight::Soft(w) => scaled(w),
            ClauseWeight::Hard => top,
        };
        let _ = write!(out, "{weight}");
        for lit in clause.literals() {
            let n = number(lit.var) as i64;
            let _ = write!(out, " {}", if lit.positive { n } else { -n });
        }
        out.push_str(" 0\n");
    }
    out
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WcnfError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing `p wcnf` header")]
    MissingHeader,
}

/// Parses the format written by [`to_wcnf`]. Weights are divided back by
/// the scale; statement ids come from `c var` lines when present, otherwise
/// variable `k` becomes statement `k - 1`. Initial labels default to false
/// when a `c var` line leaves them out.
pub fn parse_wcnf(text: &str) -> Result<WeightedClauseSet, WcnfError> {
    let syntax = |line: usize, message: &str| WcnfError::Syntax { line, message: message.to_string() };
    let mut names: Vec<Option<(StatementId, Label)>> = Vec::new();
    let mut header: Option<(usize, usize, u64)> = None;
    let mut clauses = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('c') {
            let mut parts = comment.split_whitespace();
            if let (Some("var"), Some(k), Some("="), Some(name)) = (parts.next(), parts.next(), parts.next(), parts.next())
            {
                let k: usize = k.parse().map_err(|_| syntax(line_no, "bad variable number"))?;
                let id = name
                    .strip_prefix('s')
                    .and_then(|n| n.parse().ok())
                    .ok_or_else(|| syntax(line_no, "bad statement id"))?;
                let initial = match parts.next() {
                    None | Some("F") => Label::False,
                    Some("T") => Label::True,
                    Some(_) => return Err(syntax(line_no, "initial label must be T or F")),
                };
                if k == 0 {
                    return Err(syntax(line_no, "variables are numbered from 1"));
                }
                if names.len() < k {
                    names.resize(k, None);
                }
                names[k - 1] = Some((StatementId(id), initial));
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix("p wcnf") {
            let nums: Vec<u64> = rest
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| syntax(line_no, "bad header number")))
                .collect::<Result<_, _>>()?;
            let [vars, count, top] = nums[..] else {
                return Err(syntax(line_no, "expected `p wcnf <vars> <clauses> <top>`"));
            };
            header = Some((vars as usize, count as usize, top));
            continue;
        }
        let (vars, _, top) = header.ok_or(WcnfError::MissingHeader)?;
        let tokens: Vec<i64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| syntax(line_no, "bad integer")))
            .collect::<Result<_, _>>()?;
        let Some((&weight, rest)) = tokens.split_first() else { continue };
        let Some((&0, lits)) = rest.split_last() else {
            return Err(syntax(line_no, "clause must end in 0"));
        };
        let mut literals = Vec::with_capacity(lits.len());
        for &l in lits {
            let k = l.unsigned_abs() as usize;
            if l == 0 || k > vars {
                return Err(syntax(line_no, "literal out of range"));
            }
            let id = names.get(k - 1).copied().flatten().map_or(StatementId(k as u32 - 1), |(id, _)| id);
            literals.push(Literal { var: id, positive: l > 0 });
        }
        let w = if weight < 0 {
            return Err(syntax(line_no, "negative weight"));
        } else if weight as u64 >= top {
            ClauseWeight::Hard
        } else {
            ClauseWeight::Soft(weight as f64 / WEIGHT_SCALE)
        };
        clauses.push(WeightedClause::new(literals, w).map_err(|e| syntax(line_no, &e.to_string()))?);
    }

    let (vars, count, _) = header.ok_or(WcnfError::MissingHeader)?;
    if clauses.len() != count {
        return Err(WcnfError::Syntax {
            line: text.lines().count(),
            message: format!("header announces {count} clauses, found {}", clauses.len()),
        });
    }
    let variables = (0..vars)
        .map(|k| {
            let (id, initial) = names.get(k).copied().flatten().unwrap_or((StatementId(k as u32), Label::False));
            Variable { id, initial }
        })
        .collect();
    WeightedClauseSet::new(variables, clauses).map_err(|e| WcnfError::Syntax { line: 0, message: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_exact_layout() {
        let s = StatementId;
        let vars = vec![Variable { id: s(4), initial: Label::True }, Variable { id: s(1), initial: Label::False }];
        let clauses = vec![
            WeightedClause::soft(vec![Literal::pos(s(4))], 0.9).unwrap(),
            WeightedClause::soft(vec![Literal::neg(s(1))], 1e-9).unwrap(),
            WeightedClause::soft(vec![Literal::neg(s(4)), Literal::pos(s(1))], 1.02).unwrap(),
            WeightedClause::hard(vec![Literal::pos(s(4)), Literal::pos(s(1))]).unwrap(),
        ];
        let cs = WeightedClauseSet::new(vars, clauses).unwrap();
        let expected = "c weighted CNF export\n\
                        c weights scaled by 1000000\n\
                        c var 1 = s4 T\n\
                        c var 2 = s1 F\n\
                        p wcnf 2 4 1920002\n\
                        900000 1 0\n\
                        1 -2 0\n\
                        1020000 -1 2 0\n\
                        1920002 1 2 0\n";
        assert_eq!(to_wcnf(&cs), expected);

        let parsed = parse_wcnf(expected).unwrap();
        assert_eq!(parsed.variables(), cs.variables());
        assert_eq!(parsed.clauses()[2].weight(), ClauseWeight::Soft(1.02));
        assert!(parsed.clauses()[3].is_hard());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_wcnf("p wcnf 1 1 10\n3 1\n").unwrap_err();
        assert_eq!(err, WcnfError::Syntax { line: 2, message: "clause must end in 0".into() });
        assert_eq!(parse_wcnf("1 1 0\n").unwrap_err(), WcnfError::MissingHeader);
        assert!(parse_wcnf("p wcnf 1 1 10\n3 2 0\n").is_err());
        assert!(parse_wcnf("c var 1 = s0 X\np wcnf 1 0 1\n").is_err());
        let bare = parse_wcnf("c var 1 = s7\np wcnf 1 0 1\n").unwrap();
        assert_eq!(bare.variables()[0], Variable { id: StatementId(7), initial: Label::False });
    }
}
