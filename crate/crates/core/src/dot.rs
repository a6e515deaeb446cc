//! Graphviz export.
//!
//! Statements are ellipses filled white when believed true and grey when
//! believed false. Rules are boxes; a rule violated by the shown beliefs is
//! drawn red, and a discarded rule is dashed. Edges run from premises into
//! the rule and from the rule to its hypotheses.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::model::{rule_satisfied, Assignment, BeliefGraph, RuleId, RuleType};

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

/// DOT text for `g` under `beliefs` (the graph's own labels when `None`).
pub fn to_dot(g: &BeliefGraph, beliefs: Option<&Assignment>, discarded: &BTreeSet<RuleId>) -> String {
    let own = g.labels();
    let beliefs = beliefs.unwrap_or(&own);
    let hypotheses: BTreeSet<_> = g.hypotheses().iter().collect();

    let mut out = String::from("digraph belief_graph {\n  rankdir=BT;\n  node [fontname=\"Helvetica\"];\n");
    for s in g.statements() {
        let label = beliefs.get(s.id).unwrap_or(s.label);
        let fill = if label.is_true() { "white" } else { "grey" };
        let peripheries = if hypotheses.contains(&s.id) { 2 } else { 1 };
        let _ = writeln!(
            out,
            "  {} [shape=ellipse, style=filled, fillcolor={fill}, peripheries={peripheries}, label=\"{}: {}\\n{} {:.3}\"];",
            s.id,
            s.id,
            escape(&s.text),
            label,
            s.confidence
        );
    }
    for rule in g.rules() {
        let violated = !rule_satisfied(rule, beliefs).unwrap_or(false);
        let weight = match rule.weight.soft() {
            Some(c) => format!("{c:.3}"),
            None => "hard".to_string(),
        };
        let mut attrs = format!("shape=box, label=\"{}: {} {}\"", rule.id, rule.rule_type, weight);
        if violated {
            attrs.push_str(", color=red, fontcolor=red");
        }
        if discarded.contains(&rule.id) {
            attrs.push_str(", style=dashed");
        }
        let _ = writeln!(out, "  {} [{attrs}];", rule.id);
        let undirected = matches!(rule.rule_type, RuleType::XorPair | RuleType::McHard | RuleType::McPairwise);
        let edge = if undirected { " [dir=none]" } else { "" };
        for p in &rule.premises {
            let _ = writeln!(out, "  {p} -> {}{edge};", rule.id);
        }
        for h in &rule.hypotheses {
            let _ = writeln!(out, "  {} -> {h}{edge};", rule.id);
        }
    }
    out.push_str("}\n");
    out
}
