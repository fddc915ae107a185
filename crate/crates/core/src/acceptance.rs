//! α-cut acceptance, adaptive thresholds, and the replay validator.
//!
//! [`validate`] is the single authority on whether a plan is accepted: it
//! replays every step crisply, re-grounds every degree on the concrete
//! states, recomputes `μ(π)`, and checks the goal.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunking::{macro_membership, MacroAction};
use crate::fuzzy::{plan_membership, Degree, TNormKind};
use crate::grounding::{Grounder, GroundingError};
use crate::world::{
    applicability_failure, apply, goal_satisfied, violates_hard, Domain, Problem, State, Violation, WorldError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criticality {
    Casual,
    #[default]
    Typical,
    Important,
    Critical,
}

impl Criticality {
    pub const ALL: [Criticality; 4] = [
        Criticality::Casual,
        Criticality::Typical,
        Criticality::Important,
        Criticality::Critical,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Criticality::Casual => "casual",
            Criticality::Typical => "typical",
            Criticality::Important => "important",
            Criticality::Critical => "critical",
        }
    }
}

impl fmt::Display for Criticality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criticality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Criticality::ALL
            .into_iter()
            .find(|c| c.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown criticality `{s}` (casual, typical, important, critical)"))
    }
}

/// Constants of the adaptive threshold policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveAlphaConfig {
    pub casual: f64,
    pub typical: f64,
    pub important: f64,
    pub critical: f64,
    /// Plans up to this length keep the full threshold.
    pub length_knee: usize,
    pub length_slope: f64,
    pub length_floor: f64,
    pub alpha_min: f64,
}

impl Default for AdaptiveAlphaConfig {
    fn default() -> Self {
        AdaptiveAlphaConfig {
            casual: 0.8,
            typical: 1.0,
            important: 1.15,
            critical: 1.3,
            length_knee: 4,
            length_slope: 0.03,
            length_floor: 0.5,
            alpha_min: 0.05,
        }
    }
}

impl AdaptiveAlphaConfig {
    pub fn factor(&self, c: Criticality) -> f64 {
        match c {
            Criticality::Casual => self.casual,
            Criticality::Typical => self.typical,
            Criticality::Important => self.important,
            Criticality::Critical => self.critical,
        }
    }

    pub fn length_factor(&self, n: usize) -> f64 {
        if n <= self.length_knee {
            1.0
        } else {
            (1.0 - self.length_slope * (n - self.length_knee) as f64).max(self.length_floor)
        }
    }
}

/// `clamp(α_base · f_criticality · f_length(n), α_min, 1)`.
pub fn adaptive_alpha(base: Degree, criticality: Criticality, plan_length: usize, cfg: &AdaptiveAlphaConfig) -> Degree {
    let raw = base.value() * cfg.factor(criticality) * cfg.length_factor(plan_length);
    Degree::saturating(raw.clamp(cfg.alpha_min, 1.0))
}

/// How the acceptance threshold is chosen for a problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum AlphaPolicy {
    Fixed { alpha: Degree },
    Adaptive { base: Degree, criticality: Criticality },
}

impl AlphaPolicy {
    pub fn fixed(alpha: f64) -> Self {
        AlphaPolicy::Fixed {
            alpha: Degree::saturating(alpha),
        }
    }

    pub fn alpha_for(&self, plan_length: usize, cfg: &AdaptiveAlphaConfig) -> Degree {
        match *self {
            AlphaPolicy::Fixed { alpha } => alpha,
            AlphaPolicy::Adaptive { base, criticality } => adaptive_alpha(base, criticality, plan_length, cfg),
        }
    }

    /// The smallest threshold any plan of length `≤ max_len` can face.
    pub fn loosest(&self, max_len: usize, cfg: &AdaptiveAlphaConfig) -> Degree {
        (0..=max_len)
            .map(|n| self.alpha_for(n, cfg))
            .fold(Degree::ONE, |a, b| if b < a { b } else { a })
    }

    pub fn base(&self) -> Degree {
        match *self {
            AlphaPolicy::Fixed { alpha } => alpha,
            AlphaPolicy::Adaptive { base, .. } => base,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            AlphaPolicy::Fixed { .. } => "fixed",
            AlphaPolicy::Adaptive { .. } => "adaptive",
        }
    }
}

/// `μ(π) ≥ α` (exact) and no hard violations.
pub fn accept(plan_mu: Degree, alpha: Degree, violations: &[Violation]) -> bool {
    plan_mu.value() >= alpha.value() && violations.is_empty()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FailureReason {
    FrontierExhausted,
    DepthBound,
    BelowAlpha,
    HardViolation,
    GoalUnmet,
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A contiguous run of primitive actions executed as one macro step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkSpan {
    pub macro_id: String,
    /// Index into `actions` of the first member.
    pub start: usize,
    pub len: usize,
}

/// One composition step of a plan under construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PlanStep {
    Primitive(String),
    Macro(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    /// Primitive action ids, macros expanded.
    pub actions: Vec<String>,
    /// One degree per composition step (a macro contributes one).
    pub step_degrees: Vec<Degree>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub chunks: Vec<ChunkSpan>,
    pub plan_mu: Degree,
    pub alpha_used: Degree,
    pub accepted: bool,
    pub failure_reason: Option<FailureReason>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
}

impl PlanResult {
    pub fn failure(reason: FailureReason, alpha: Degree) -> Self {
        PlanResult {
            actions: Vec::new(),
            step_degrees: Vec::new(),
            chunks: Vec::new(),
            plan_mu: Degree::ZERO,
            alpha_used: alpha,
            accepted: false,
            failure_reason: Some(reason),
            violations: Vec::new(),
        }
    }

    /// Number of composition steps.
    pub fn composition_len(&self) -> usize {
        self.actions.len() - self.chunks.iter().map(|c| c.len - 1).sum::<usize>()
    }

    /// Composition steps as (macro id if any, primitive ids).
    pub fn steps(&self) -> Vec<(Option<&str>, &[String])> {
        let mut out = Vec::new();
        let mut i = 0;
        let mut chunks = self.chunks.iter().peekable();
        while i < self.actions.len() {
            match chunks.peek() {
                Some(c) if c.start == i => {
                    let end = (i + c.len).min(self.actions.len());
                    out.push((Some(c.macro_id.as_str()), &self.actions[i..end]));
                    i = end;
                    chunks.next();
                }
                _ => {
                    out.push((None, &self.actions[i..i + 1]));
                    i += 1;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("unknown macro `{0}`")]
    UnknownMacro(String),
    #[error("macro `{0}` members do not match the plan actions")]
    MacroMismatch(String),
    #[error("chunk spans overlap or run past the end of the plan")]
    BadChunks,
    #[error(transparent)]
    Grounding(#[from] GroundingError),
    #[error(transparent)]
    World(#[from] WorldError),
}

/// Everything needed to evaluate plans for one problem.
#[derive(Clone, Copy)]
pub struct Evaluator<'a> {
    pub domain: &'a Domain,
    pub problem: &'a Problem,
    pub tnorm: TNormKind,
    pub grounder: &'a Grounder,
    pub macros: &'a [MacroAction],
    pub alpha_config: AdaptiveAlphaConfig,
}

impl<'a> Evaluator<'a> {
    pub fn new(domain: &'a Domain, problem: &'a Problem, tnorm: TNormKind, grounder: &'a Grounder) -> Self {
        Evaluator {
            domain,
            problem,
            tnorm,
            grounder,
            macros: &[],
            alpha_config: AdaptiveAlphaConfig::default(),
        }
    }

    pub fn with_macros(mut self, macros: &'a [MacroAction]) -> Self {
        self.macros = macros;
        self
    }

    pub fn with_alpha_config(mut self, cfg: AdaptiveAlphaConfig) -> Self {
        self.alpha_config = cfg;
        self
    }

    pub fn find_macro(&self, id: &str) -> Option<&'a MacroAction> {
        self.macros.iter().find(|m| m.id == id)
    }

    pub fn alpha_for(&self, composition_len: usize) -> Degree {
        self.problem.alpha.alpha_for(composition_len, &self.alpha_config)
    }

    /// Expands steps into primitive ids plus chunk spans.
    pub fn flatten(&self, steps: &[PlanStep]) -> Result<(Vec<String>, Vec<ChunkSpan>), ValidationError> {
        let mut actions = Vec::new();
        let mut chunks = Vec::new();
        for step in steps {
            match step {
                PlanStep::Primitive(id) => actions.push(id.clone()),
                PlanStep::Macro(id) => {
                    let mac = self
                        .find_macro(id)
                        .ok_or_else(|| ValidationError::UnknownMacro(id.clone()))?;
                    chunks.push(ChunkSpan {
                        macro_id: id.clone(),
                        start: actions.len(),
                        len: mac.members.len(),
                    });
                    actions.extend(mac.members.iter().cloned());
                }
            }
        }
        Ok((actions, chunks))
    }

    pub fn validate_steps(&self, steps: &[PlanStep]) -> Result<PlanResult, ValidationError> {
        let (actions, chunks) = self.flatten(steps)?;
        validate(self, &actions, &chunks)
    }
}

/// Replays `actions` (with macro `chunks`) from the initial state and decides acceptance.
pub fn validate(ev: &Evaluator<'_>, actions: &[String], chunks: &[ChunkSpan]) -> Result<PlanResult, ValidationError> {
    for id in actions {
        if ev.domain.action(id).is_none() {
            return Err(ValidationError::UnknownAction(id.clone()));
        }
    }
    let mut last_end = 0;
    for c in chunks {
        if c.start < last_end || c.len < 2 || c.start + c.len > actions.len() {
            return Err(ValidationError::BadChunks);
        }
        last_end = c.start + c.len;
        let mac = ev
            .find_macro(&c.macro_id)
            .ok_or_else(|| ValidationError::UnknownMacro(c.macro_id.clone()))?;
        if mac.members[..] != actions[c.start..c.start + c.len] {
            return Err(ValidationError::MacroMismatch(c.macro_id.clone()));
        }
    }
    let mut result = PlanResult {
        actions: actions.to_vec(),
        step_degrees: Vec::new(),
        chunks: chunks.to_vec(),
        plan_mu: Degree::ONE,
        alpha_used: Degree::ONE,
        accepted: false,
        failure_reason: None,
        violations: Vec::new(),
    };
    result.alpha_used = ev.alpha_for(result.composition_len());

    let mut state: State = ev.problem.initial.clone();
    let initial_violations = violates_hard(&state);
    if !initial_violations.is_empty() {
        result.violations = initial_violations.into_iter().map(|v| v.at_step(0)).collect();
        result.plan_mu = Degree::ZERO;
        result.failure_reason = Some(FailureReason::HardViolation);
        return Ok(result);
    }
    let mut primitive_index = 0;
    for (macro_id, members) in result
        .steps()
        .into_iter()
        .map(|(m, a)| (m.map(str::to_string), a.to_vec()))
        .collect::<Vec<_>>()
    {
        let degree = match &macro_id {
            Some(id) => {
                let mac = ev.find_macro(id).expect("checked above");
                macro_membership(ev.domain, mac, &state, ev.tnorm, ev.grounder)?
            }
            None => {
                let action = ev.domain.action(&members[0]).expect("checked above");
                if applicability_failure(&state, action)?.is_none() {
                    ev.grounder.action_degree(ev.domain, ev.tnorm, &state, action)?
                } else {
                    Degree::ZERO
                }
            }
        };
        for id in &members {
            primitive_index += 1;
            let action = ev.domain.action(id).expect("checked above");
            if let Some(violation) = applicability_failure(&state, action)? {
                result.violations.push(violation.at_step(primitive_index));
                result.failure_reason = Some(FailureReason::HardViolation);
                result.plan_mu = plan_membership(ev.tnorm, result.step_degrees.iter().copied());
                return Ok(result);
            }
            state = apply(&state, action)?;
        }
        result.step_degrees.push(degree);
    }
    result.plan_mu = plan_membership(ev.tnorm, result.step_degrees.iter().copied());
    if !goal_satisfied(&state, &ev.problem.goal) {
        result.failure_reason = Some(FailureReason::GoalUnmet);
        return Ok(result);
    }
    result.accepted = accept(result.plan_mu, result.alpha_used, &result.violations);
    if !result.accepted {
        result.failure_reason = Some(FailureReason::BelowAlpha);
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grounding::{make_table_oracle, AggregationPolicy, OracleSpec, VaguePredicate};
    use crate::world::{facts, Action, Goal, LogicalConstraints, ResourceDecl, TemporalBudget, ViolationKind};
    use proptest::prelude::*;
    use std::collections::BTreeMap;
    use std::sync::Arc;

    fn d(v: f64) -> Degree {
        Degree::new(v).unwrap()
    }

    #[test]
    fn accept_examples() {
        assert!(accept(d(0.8), d(0.8), &[]));
        assert!(!accept(d(0.9), d(0.8), &[Violation::temporal("late")]));
        assert!(!accept(d(0.79), d(0.8), &[]));
    }

    #[test]
    fn adaptive_examples() {
        let cfg = AdaptiveAlphaConfig::default();
        assert_eq!(adaptive_alpha(d(0.7), Criticality::Typical, 3, &cfg).value(), 0.7);
        // 0.7 · max(0.5, 1 − 0.03·10)
        let expected = 0.7 * 0.7;
        assert!((adaptive_alpha(d(0.7), Criticality::Typical, 14, &cfg).value() - expected).abs() < 1e-12);
        assert!((expected - 0.49).abs() < 1e-12);
        assert!((adaptive_alpha(d(0.7), Criticality::Typical, 100, &cfg).value() - 0.35).abs() < 1e-12);
        assert_eq!(adaptive_alpha(d(0.9), Criticality::Critical, 1, &cfg), Degree::ONE);
        assert_eq!(adaptive_alpha(d(0.01), Criticality::Casual, 1, &cfg).value(), 0.05);
    }

    #[test]
    fn criticality_factors_ascend() {
        let cfg = AdaptiveAlphaConfig::default();
        let f: Vec<f64> = Criticality::ALL.iter().map(|c| cfg.factor(*c)).collect();
        assert!(f.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn alpha_policy_serde() {
        let p = AlphaPolicy::Adaptive {
            base: d(0.7),
            criticality: Criticality::Important,
        };
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, r#"{"mode":"adaptive","base":0.7,"criticality":"important"}"#);
        assert_eq!(serde_json::from_str::<AlphaPolicy>(&json).unwrap(), p);
    }

    proptest! {
        #[test]
        fn adaptive_is_monotone(base in 0u32..=100, n in 0usize..60, ci in 0usize..3) {
            let cfg = AdaptiveAlphaConfig::default();
            let b = d(base as f64 / 100.0);
            let c = Criticality::ALL[ci];
            prop_assert!(adaptive_alpha(b, c, n + 1, &cfg) <= adaptive_alpha(b, c, n, &cfg));
            prop_assert!(adaptive_alpha(b, c, n, &cfg) <= adaptive_alpha(b, Criticality::ALL[ci + 1], n, &cfg));
        }

        #[test]
        fn accept_is_monotone(mu in 0u32..=100, alpha in 0u32..=100, bump in 0u32..=100) {
            let m = d(mu as f64 / 100.0);
            let a = d(alpha as f64 / 100.0);
            let higher_mu = d(((mu + bump).min(100)) as f64 / 100.0);
            let higher_alpha = d(((alpha + bump).min(100)) as f64 / 100.0);
            if accept(m, a, &[]) {
                prop_assert!(accept(higher_mu, a, &[]));
            } else {
                prop_assert!(!accept(m, higher_alpha, &[]));
            }
        }
    }

    fn chain_domain(n: usize) -> Domain {
        let mut actions = Vec::new();
        for i in 0..n {
            let mut a = Action::new(format!("s{i}"));
            if i > 0 {
                a.required_facts = facts([format!("done{}", i - 1)]);
            }
            a.add_facts = facts([format!("done{i}")]);
            a.graded_predicates = vec!["ok".into()];
            a.resource_needs.insert("flour".into(), 1.0);
            a.resource_deltas.insert("flour".into(), -1.0);
            actions.push(a);
        }
        Domain {
            name: "chain".into(),
            resources: vec![ResourceDecl {
                name: "flour".into(),
                unit: "cup".into(),
            }],
            fact_predicates: vec![],
            predicates: vec![VaguePredicate::new("ok", "")],
            constraints: LogicalConstraints::default(),
            actions,
            macro_estimates: BTreeMap::new(),
            oracle: OracleSpec::default(),
        }
    }

    fn problem(dom: &Domain, n: usize, flour: f64, alpha: f64) -> Problem {
        let mut r = BTreeMap::new();
        r.insert("flour".to_string(), flour);
        Problem {
            name: "p".into(),
            initial: dom.state(&r, Default::default(), TemporalBudget::unbounded()),
            goal: Goal {
                required_facts: facts([format!("done{}", n - 1)]),
                ..Goal::default()
            },
            alpha: AlphaPolicy::fixed(alpha),
            meta: BTreeMap::new(),
        }
    }

    fn grounder(dom: &Domain, mu: f64) -> Grounder {
        let table = dom
            .actions
            .iter()
            .map(|a| (("ok".to_string(), a.id.clone()), d(mu)))
            .collect();
        Grounder::new(
            Arc::new(make_table_oracle(table, 0.0, 0, d(0.5), true)),
            AggregationPolicy::default(),
            0,
        )
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    #[test]
    fn validate_accepts_good_plan() {
        let dom = chain_domain(1);
        let prob = problem(&dom, 1, 5.0, 0.8);
        let g = grounder(&dom, 0.9);
        let ev = Evaluator::new(&dom, &prob, TNormKind::Lukasiewicz, &g);
        let r = validate(&ev, &ids(1), &[]).unwrap();
        assert!(r.accepted);
        assert_eq!(r.plan_mu.value(), 0.9);
        assert_eq!(r.failure_reason, None);
    }

    #[test]
    fn validate_reports_hard_violation_step() {
        let dom = chain_domain(3);
        let prob = problem(&dom, 3, 1.0, 0.1);
        let g = grounder(&dom, 0.9);
        let ev = Evaluator::new(&dom, &prob, TNormKind::Lukasiewicz, &g);
        let r = validate(&ev, &ids(3), &[]).unwrap();
        assert!(!r.accepted);
        assert_eq!(r.failure_reason, Some(FailureReason::HardViolation));
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].step, Some(2));
        assert_eq!(r.violations[0].kind, ViolationKind::Resource);
    }

    #[test]
    fn six_steps_of_point_eight_compose_to_zero() {
        let dom = chain_domain(6);
        let g = grounder(&dom, 0.8);
        for alpha in [1e-9, 0.01, 0.5, 1.0] {
            let prob = problem(&dom, 6, 10.0, alpha);
            let ev = Evaluator::new(&dom, &prob, TNormKind::Lukasiewicz, &g);
            let r = validate(&ev, &ids(6), &[]).unwrap();
            assert_eq!(r.plan_mu, Degree::ZERO);
            assert_eq!(r.step_degrees.len(), 6);
            assert!(!r.accepted);
            assert_eq!(r.failure_reason, Some(FailureReason::BelowAlpha));
        }
    }

    #[test]
    fn validate_unknown_action_is_an_error() {
        let dom = chain_domain(1);
        let prob = problem(&dom, 1, 5.0, 0.8);
        let g = grounder(&dom, 0.9);
        let ev = Evaluator::new(&dom, &prob, TNormKind::Lukasiewicz, &g);
        assert_eq!(
            validate(&ev, &["nope".to_string()], &[]),
            Err(ValidationError::UnknownAction("nope".into()))
        );
    }

    #[test]
    fn validate_goal_unmet() {
        let dom = chain_domain(2);
        let prob = problem(&dom, 2, 5.0, 0.1);
        let g = grounder(&dom, 0.9);
        let ev = Evaluator::new(&dom, &prob, TNormKind::Lukasiewicz, &g);
        let r = validate(&ev, &ids(1), &[]).unwrap();
        assert_eq!(r.failure_reason, Some(FailureReason::GoalUnmet));
        assert!(!r.accepted);
    }

    #[test]
    fn validate_with_macro_span() {
        let mut dom = chain_domain(2);
        for a in &mut dom.actions {
            a.chunk_tag = Some("prep".into());
        }
        dom.macro_estimates.insert("s0+s1".into(), d(0.85));
        let (macros, _) = crate::chunking::build_macros(&dom, 3);
        let prob = problem(&dom, 2, 5.0, 0.8);
        let g = grounder(&dom, 0.8);
        let ev = Evaluator::new(&dom, &prob, TNormKind::Lukasiewicz, &g).with_macros(&macros);
        let span = ChunkSpan {
            macro_id: "s0+s1".into(),
            start: 0,
            len: 2,
        };
        let r = validate(&ev, &ids(2), std::slice::from_ref(&span)).unwrap();
        assert!(r.accepted);
        assert_eq!(r.step_degrees, vec![d(0.85)]);
        assert_eq!(r.composition_len(), 1);

        let unchunked = validate(&ev, &ids(2), &[]).unwrap();
        assert!(!unchunked.accepted);

        let bad = ChunkSpan {
            macro_id: "s1+s0".into(),
            ..span
        };
        assert!(matches!(
            validate(&ev, &ids(2), &[bad]),
            Err(ValidationError::UnknownMacro(_))
        ));
    }
}
