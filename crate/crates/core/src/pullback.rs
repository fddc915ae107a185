//! Crisp compatibility of a forward state with a backward condition.

use crate::acceptance::{Evaluator, PlanStep, ValidationError};
use crate::chunking::{apply_macro, macro_membership};
use crate::fuzzy::{plan_membership, Degree};
use crate::search::Condition;
use crate::world::{applicability_failure, apply, goal_satisfied, State, Violation};

#[derive(Debug, Clone, PartialEq)]
pub struct MergeResult {
    pub compatible: bool,
    /// Final state of the stitched continuation.
    pub merged_state: Option<State>,
    pub merged_mu: Option<Degree>,
    pub violations: Vec<Violation>,
}

impl MergeResult {
    fn rejected(violations: Vec<Violation>) -> Self {
        MergeResult {
            compatible: false,
            merged_state: None,
            merged_mu: None,
            violations,
        }
    }
}

/// Condition-level checks (facts, resources, time) without replay.
pub fn condition_violations(state: &State, condition: &Condition) -> Vec<Violation> {
    let mut out = Vec::new();
    for atom in condition.required_facts.difference(&state.facts) {
        out.push(Violation::logic(format!("meet requires `{atom}`, which does not hold")));
    }
    for atom in condition.forbidden_facts.intersection(&state.facts) {
        out.push(Violation::logic(format!("meet forbids `{atom}`, which holds")));
    }
    for (name, min) in &condition.resource_mins {
        let have = state.resource(name);
        if have < *min {
            out.push(Violation::resource(format!(
                "meet needs {min} of `{name}`, have {have}"
            )));
        }
    }
    if !state.time.fits(condition.remaining_time_min) {
        out.push(Violation::temporal(format!(
            "elapsed {} plus remaining {} exceeds the budget",
            state.time.elapsed, condition.remaining_time_min
        )));
    }
    out
}

/// Checks the meet crisply, then replays `suffix` from `forward` and re-grounds its degrees.
pub fn pullback_compatible(
    ev: &Evaluator<'_>,
    forward: &State,
    condition: &Condition,
    forward_mu: Degree,
    suffix: &[PlanStep],
) -> Result<MergeResult, ValidationError> {
    let violations = condition_violations(forward, condition);
    if !violations.is_empty() {
        return Ok(MergeResult::rejected(violations));
    }
    let mut state = forward.clone();
    let mut degrees = vec![forward_mu];
    for (i, step) in suffix.iter().enumerate() {
        let (next, degree) = match step {
            PlanStep::Primitive(id) => {
                let action = ev
                    .domain
                    .action(id)
                    .ok_or_else(|| ValidationError::UnknownAction(id.clone()))?;
                if let Some(v) = applicability_failure(&state, action)? {
                    return Ok(MergeResult::rejected(vec![v.at_step(i + 1)]));
                }
                let mu = ev.grounder.action_degree(ev.domain, ev.tnorm, &state, action)?;
                (apply(&state, action)?, mu)
            }
            PlanStep::Macro(id) => {
                let mac = ev
                    .find_macro(id)
                    .ok_or_else(|| ValidationError::UnknownMacro(id.clone()))?;
                match apply_macro(ev.domain, mac, &state)? {
                    Some(next) => (next, macro_membership(ev.domain, mac, &state, ev.tnorm, ev.grounder)?),
                    None => {
                        return Ok(MergeResult::rejected(vec![Violation::logic(format!(
                            "macro `{id}` is not applicable on the stitched path"
                        ))
                        .at_step(i + 1)]))
                    }
                }
            }
        };
        state = next;
        degrees.push(degree);
    }
    if !goal_satisfied(&state, &ev.problem.goal) {
        return Ok(MergeResult::rejected(vec![Violation::logic(
            "stitched continuation does not reach the goal",
        )]));
    }
    Ok(MergeResult {
        compatible: true,
        merged_state: Some(state),
        merged_mu: Some(plan_membership(ev.tnorm, degrees)),
        violations: Vec::new(),
    })
}
