//! Exhaustive forward enumeration over primitive actions.

use std::cmp::Ordering;

use crate::acceptance::{accept, AdaptiveAlphaConfig, AlphaPolicy, FailureReason, PlanResult};
use crate::fuzzy::{tnorm, Degree, TNormKind};
use crate::grounding::Grounder;
use crate::world::{apply, crisp_applicable, goal_satisfied, Domain, Problem, State};

use super::SearchError;

pub const DEFAULT_NODE_CAP: usize = 2_000_000;

struct Best {
    actions: Vec<String>,
    degrees: Vec<Degree>,
    mu: Degree,
    accepted: bool,
}

fn better(a: &Best, b: &Best) -> bool {
    let ord = a
        .accepted
        .cmp(&b.accepted)
        .then(a.mu.value().total_cmp(&b.mu.value()))
        .then(b.actions.len().cmp(&a.actions.len()))
        .then_with(|| b.actions.cmp(&a.actions));
    ord == Ordering::Greater
}

struct Enumerator<'a> {
    domain: &'a Domain,
    problem: &'a Problem,
    alpha: &'a AlphaPolicy,
    alpha_config: AdaptiveAlphaConfig,
    kind: TNormKind,
    grounder: &'a Grounder,
    depth_bound: usize,
    node_cap: usize,
    nodes: usize,
    cut: bool,
    best: Option<Best>,
}

impl Enumerator<'_> {
    fn visit(
        &mut self,
        state: &State,
        actions: &mut Vec<String>,
        degrees: &mut Vec<Degree>,
        mu: Degree,
    ) -> Result<(), SearchError> {
        self.nodes += 1;
        if self.nodes > self.node_cap {
            return Err(SearchError::NodeCap(self.node_cap));
        }
        if goal_satisfied(state, &self.problem.goal) {
            let alpha = self.alpha.alpha_for(actions.len(), &self.alpha_config);
            let candidate = Best {
                actions: actions.clone(),
                degrees: degrees.clone(),
                mu,
                accepted: accept(mu, alpha, &[]),
            };
            if self.best.as_ref().is_none_or(|b| better(&candidate, b)) {
                self.best = Some(candidate);
            }
        }
        if actions.len() == self.depth_bound {
            if self
                .domain
                .actions
                .iter()
                .any(|a| crisp_applicable(state, a).unwrap_or(false))
            {
                self.cut = true;
            }
            return Ok(());
        }
        for action in &self.domain.actions {
            if !crisp_applicable(state, action)? {
                continue;
            }
            let step = self.grounder.action_degree(self.domain, self.kind, state, action)?;
            let next = apply(state, action)?;
            actions.push(action.id.clone());
            degrees.push(step);
            self.visit(&next, actions, degrees, tnorm(self.kind, mu, step))?;
            actions.pop();
            degrees.pop();
        }
        Ok(())
    }
}

/// Best plan by `μ(π)` among all crisp-feasible sequences up to `depth_bound`.
///
/// Plans meeting `α` are preferred; ties go to the shorter, then the lexicographically smaller plan.
pub fn brute_force_plan(
    domain: &Domain,
    problem: &Problem,
    alpha: &AlphaPolicy,
    kind: TNormKind,
    grounder: &Grounder,
    depth_bound: usize,
) -> Result<PlanResult, SearchError> {
    brute_force_plan_capped(domain, problem, alpha, kind, grounder, depth_bound, DEFAULT_NODE_CAP)
}

pub fn brute_force_plan_capped(
    domain: &Domain,
    problem: &Problem,
    alpha: &AlphaPolicy,
    kind: TNormKind,
    grounder: &Grounder,
    depth_bound: usize,
    node_cap: usize,
) -> Result<PlanResult, SearchError> {
    let mut e = Enumerator {
        domain,
        problem,
        alpha,
        alpha_config: AdaptiveAlphaConfig::default(),
        kind,
        grounder,
        depth_bound,
        node_cap,
        nodes: 0,
        cut: false,
        best: None,
    };
    e.visit(&problem.initial, &mut Vec::new(), &mut Vec::new(), Degree::ONE)?;
    let cfg = AdaptiveAlphaConfig::default();
    Ok(match e.best {
        Some(b) => PlanResult {
            alpha_used: alpha.alpha_for(b.actions.len(), &cfg),
            actions: b.actions,
            step_degrees: b.degrees,
            chunks: Vec::new(),
            plan_mu: b.mu,
            accepted: b.accepted,
            failure_reason: (!b.accepted).then_some(FailureReason::BelowAlpha),
            violations: Vec::new(),
        },
        None => {
            let reason = if e.cut {
                FailureReason::DepthBound
            } else {
                FailureReason::FrontierExhausted
            };
            PlanResult::failure(reason, alpha.alpha_for(0, &cfg))
        }
    })
}
