//! Raw oracle scores to calibrated confidences.
//!
//! Raw scores are heavily skewed towards 0 and 1, so every channel maps a
//! raw score `s` to `t * exp(k * (s - 1))`. Statements use `t = 1`; each rule
//! type has its own `(k, t)` pair. XOR and multiple-choice rules have no
//! oracle score and always enter with raw score 1.0, so their confidence is
//! exactly their `t`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BeliefGraph, Label, RuleType, RuleWeight, StatementId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub k: f64,
    pub k_entailment: f64,
    pub k_xor: f64,
    pub k_mc: f64,
    pub t_entailment: f64,
    pub t_xor: f64,
    pub t_mc: f64,
    pub m_xor: f64,
    pub beta: f64,
    pub d_max: u32,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            k: 9.0,
            k_entailment: 36.0,
            k_xor: 30.0,
            k_mc: 9.0,
            t_entailment: 1.02,
            t_xor: 1.1,
            t_mc: 0.98,
            m_xor: 0.3,
            beta: 0.95,
            d_max: 5,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("score {0} is outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("mc_hard rules are hard constraints and carry no calibrated confidence")]
    HardRule,
    #[error("invalid calibration config: {0}")]
    Config(String),
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        let positive = [
            ("k", self.k),
            ("k_entailment", self.k_entailment),
            ("k_xor", self.k_xor),
            ("k_mc", self.k_mc),
            ("t_entailment", self.t_entailment),
            ("t_xor", self.t_xor),
            ("t_mc", self.t_mc),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(CalibrationError::Config(format!("{name} must be > 0, got {value}")));
            }
        }
        if !(0.0..=1.0).contains(&self.m_xor) {
            return Err(CalibrationError::Config(format!("m_xor must lie in [0, 1], got {}", self.m_xor)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(CalibrationError::Config(format!("beta must lie in (0, 1], got {}", self.beta)));
        }
        Ok(())
    }

    fn rule_channel(&self, rule_type: RuleType) -> Result<(f64, f64), CalibrationError> {
        match rule_type {
            RuleType::Entailment => Ok((self.k_entailment, self.t_entailment)),
            RuleType::XorPair => Ok((self.k_xor, self.t_xor)),
            RuleType::McPairwise => Ok((self.k_mc, self.t_mc)),
            RuleType::McHard => Err(CalibrationError::HardRule),
        }
    }
}

fn check_score(s: f64) -> Result<f64, CalibrationError> {
    if (0.0..=1.0).contains(&s) {
        Ok(s)
    } else {
        Err(CalibrationError::ScoreOutOfRange(s))
    }
}

/// `exp(k * (s_raw - 1))`.
pub fn calibrate_statement(s_raw: f64, cfg: &CalibrationConfig) -> Result<f64, CalibrationError> {
    let s = check_score(s_raw)?;
    Ok((cfg.k * (s - 1.0)).exp())
}

/// `t_i * exp(k_i * (s_raw - 1))` for the channel of `rule_type`.
pub fn calibrate_rule(s_raw: f64, rule_type: RuleType, cfg: &CalibrationConfig) -> Result<f64, CalibrationError> {
    let (k, t) = cfg.rule_channel(rule_type)?;
    let s = check_score(s_raw)?;
    Ok(t * (k * (s - 1.0)).exp())
}

/// Label and raw confidence from a yes/no score. 0.5 maps to true.
pub fn label_from_score(s_d: f64) -> Result<(Label, f64), CalibrationError> {
    let s = check_score(s_d)?;
    Ok(if s >= 0.5 { (Label::True, s) } else { (Label::False, 1.0 - s) })
}

/// Slack on the inclusive `m_xor` boundary, so decimal inputs such as
/// `0.65 - 0.35` compare equal to `0.3`.
const MARGIN_SLACK: f64 = 1e-12;

/// Whether an XOR pair between a statement and its negation is kept.
/// Pairs whose raw scores are within `m_xor` of each other are dropped.
pub fn xor_admissible(score_statement: f64, score_negation: f64, cfg: &CalibrationConfig) -> bool {
    (score_statement - score_negation).abs() > cfg.m_xor + MARGIN_SLACK
}

/// Multiplies by `beta` the confidence of every soft entailment rule whose
/// premises are all concluded by no entailment rule in the graph.
///
/// Not idempotent; construction applies it exactly once.
pub fn apply_boundary_damping(g: &BeliefGraph, cfg: &CalibrationConfig) -> BeliefGraph {
    let supported: BTreeSet<StatementId> = g
        .rules()
        .iter()
        .filter(|r| r.rule_type == RuleType::Entailment)
        .flat_map(|r| r.hypotheses.iter().copied())
        .collect();
    let rules = g
        .rules()
        .iter()
        .map(|rule| {
            let mut rule = rule.clone();
            if rule.rule_type == RuleType::Entailment && rule.premises.iter().all(|p| !supported.contains(p)) {
                if let RuleWeight::Soft(w) = rule.weight {
                    rule.weight = RuleWeight::Soft(w * cfg.beta);
                }
            }
            rule
        })
        .collect();
    g.with_rules(rules).expect("damping preserves graph structure")
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::model::tests::{hypothesis, node};
    use crate::model::{RuleId, RuleNode};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-6
    }

    #[test]
    fn defaults_match_tuned_values() {
        let cfg = CalibrationConfig::default();
        assert_eq!((cfg.k, cfg.k_entailment, cfg.k_xor, cfg.k_mc), (9.0, 36.0, 30.0, 9.0));
        assert_eq!((cfg.t_entailment, cfg.t_xor, cfg.t_mc), (1.02, 1.1, 0.98));
        assert_eq!((cfg.m_xor, cfg.beta, cfg.d_max), (0.3, 0.95, 5));
        cfg.validate().unwrap();
    }

    #[test]
    fn statement_channel() {
        let cfg = CalibrationConfig::default();
        assert_eq!(calibrate_statement(1.0, &cfg).unwrap(), 1.0);
        assert!(close(calibrate_statement(0.5, &cfg).unwrap(), 0.011109));
        assert!(close(calibrate_statement(0.9, &cfg).unwrap(), 0.40657));
        assert_eq!(calibrate_statement(1.2, &cfg), Err(CalibrationError::ScoreOutOfRange(1.2)));
        assert!(calibrate_statement(-0.1, &cfg).is_err());
    }

    #[test]
    fn rule_channels() {
        let cfg = CalibrationConfig::default();
        assert_eq!(calibrate_rule(1.0, RuleType::Entailment, &cfg).unwrap(), 1.02);
        assert_eq!(calibrate_rule(1.0, RuleType::XorPair, &cfg).unwrap(), 1.1);
        assert_eq!(calibrate_rule(1.0, RuleType::McPairwise, &cfg).unwrap(), 0.98);
        assert!(close(calibrate_rule(0.9, RuleType::Entailment, &cfg).unwrap(), 0.027870));
        assert_eq!(calibrate_rule(1.0, RuleType::McHard, &cfg), Err(CalibrationError::HardRule));
    }

    #[test]
    fn labels_from_scores() {
        assert_eq!(label_from_score(0.9).unwrap(), (Label::True, 0.9));
        let (label, conf) = label_from_score(0.2).unwrap();
        assert_eq!(label, Label::False);
        assert!(close(conf, 0.8));
        assert_eq!(label_from_score(0.5).unwrap(), (Label::True, 0.5));
    }

    #[test]
    fn xor_margin() {
        let cfg = CalibrationConfig::default();
        assert!(xor_admissible(0.9, 0.1, &cfg));
        assert!(!xor_admissible(0.6, 0.4, &cfg));
        assert!(!xor_admissible(0.65, 0.35, &cfg));
        assert!(xor_admissible(0.66, 0.35, &cfg));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let cfg = CalibrationConfig { beta: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = CalibrationConfig { m_xor: 1.5, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = CalibrationConfig { k_xor: -1.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn damping_touches_only_boundary_entailments() {
        // 0 <- {1, 2} (interior: 1 is concluded by a rule), 1 <- {3} (boundary).
        let statements: BTreeMap<_, _> =
            [hypothesis(0, true, 0.9), node(1, true, 0.9), node(2, true, 0.9), node(3, true, 0.9), node(4, false, 0.9)]
                .into_iter()
                .map(|n| (n.id, n))
                .collect();
        let s = StatementId;
        let rules = vec![
            RuleNode::entailment(RuleId(0), vec![s(1), s(2)], s(0), 1.0, 1.0),
            RuleNode::entailment(RuleId(1), vec![s(3)], s(1), 1.0, 0.8),
            RuleNode::xor_pair(RuleId(2), s(3), s(4), 1.1),
        ];
        let g = BeliefGraph::new(statements, rules, vec![s(0)]).unwrap();
        let damped = apply_boundary_damping(&g, &CalibrationConfig::default());
        let weights: Vec<_> = damped.rules().iter().map(|r| r.weight.soft().unwrap()).collect();
        assert_eq!(weights[0], 1.0);
        assert!(close(weights[1], 0.76));
        assert_eq!(weights[2], 1.1);
        assert_eq!(damped.rules()[1].raw_score, 1.0);
    }
}
