//! Backward conditions and STRIPS-style regression through actions.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::fuzzy::{residuum, Degree, TNormKind};
use crate::world::{Action, Domain, FactSet, Goal, LogicalConstraints, State, TemporalBudget};

use super::SearchError;

/// A partial state description: what must hold for the rest of the plan to work.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Condition {
    pub required_facts: FactSet,
    pub forbidden_facts: FactSet,
    pub resource_mins: BTreeMap<String, f64>,
    pub remaining_time_min: f64,
}

impl Condition {
    pub fn from_goal(goal: &Goal) -> Self {
        Condition {
            required_facts: goal.required_facts.clone(),
            forbidden_facts: FactSet::new(),
            resource_mins: goal
                .resource_mins
                .iter()
                .filter(|(_, m)| **m > 0.0)
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
            remaining_time_min: 0.0,
        }
    }

    /// Dedup key; resource minima rounded like state digests.
    pub fn key(&self) -> String {
        let mut out = String::new();
        for a in &self.required_facts {
            out.push_str(&a.to_string());
            out.push(';');
        }
        out.push('|');
        for a in &self.forbidden_facts {
            out.push_str(&a.to_string());
            out.push(';');
        }
        out.push('|');
        for (k, v) in &self.resource_mins {
            out.push_str(&format!("{k}={:.6};", v));
        }
        out.push_str(&format!("|{:.6}", self.remaining_time_min));
        out
    }

    /// Whether the required facts can co-hold under the domain constraints.
    pub fn consistent(&self, constraints: &LogicalConstraints) -> bool {
        if self.required_facts.iter().any(|a| self.forbidden_facts.contains(a)) {
            return false;
        }
        if self.required_facts.iter().any(|a| constraints.forbidden.contains(a)) {
            return false;
        }
        !constraints
            .mutex
            .iter()
            .any(|(a, b)| self.required_facts.contains(a) && self.required_facts.contains(b))
    }

    /// The least concrete state matching the condition, used to ground degrees backward.
    pub fn pseudo_state(&self, domain: &Domain, budget: Option<f64>) -> State {
        domain.state(
            &self.resource_mins,
            self.required_facts.clone(),
            TemporalBudget { elapsed: 0.0, budget },
        )
    }

    /// `true` if `action` contributes something this condition asks for.
    pub fn relevant(&self, action: &Action) -> bool {
        action.goal_relevant
            || action.add_facts.iter().any(|a| self.required_facts.contains(a))
            || action
                .resource_deltas
                .iter()
                .any(|(r, d)| *d > 0.0 && self.resource_mins.get(r).is_some_and(|m| *m > 0.0))
    }

    /// The condition that must hold before `action` for `self` to hold after it.
    ///
    /// `None` when the action clobbers the condition or the result is unsatisfiable.
    pub fn regress(
        &self,
        action: &Action,
        constraints: &LogicalConstraints,
        time_available: Option<f64>,
    ) -> Option<Condition> {
        if action.del_facts.iter().any(|a| self.required_facts.contains(a)) {
            return None;
        }
        if action.add_facts.iter().any(|a| self.forbidden_facts.contains(a)) {
            return None;
        }
        let mut required: FactSet = self.required_facts.difference(&action.add_facts).cloned().collect();
        required.extend(action.required_facts.iter().cloned());
        let mut forbidden: FactSet = self.forbidden_facts.difference(&action.del_facts).cloned().collect();
        forbidden.extend(action.forbidden_facts.iter().cloned());

        let mut mins = BTreeMap::new();
        let names = self
            .resource_mins
            .keys()
            .chain(action.resource_needs.keys())
            .chain(action.resource_deltas.keys());
        for name in names {
            if mins.contains_key(name) {
                continue;
            }
            let after = self.resource_mins.get(name).copied().unwrap_or(0.0);
            let delta = action.resource_deltas.get(name).copied().unwrap_or(0.0);
            let need = action.resource_needs.get(name).copied().unwrap_or(0.0);
            let before = need.max(after - delta).max(-delta).max(0.0);
            if before > 0.0 {
                mins.insert(name.clone(), before);
            }
        }
        let remaining = self.remaining_time_min + action.duration;
        if time_available.is_some_and(|t| remaining > t) {
            return None;
        }
        let out = Condition {
            required_facts: required,
            forbidden_facts: forbidden,
            resource_mins: mins,
            remaining_time_min: remaining,
        };
        out.consistent(constraints).then_some(out)
    }
}

/// How the per-action residua of a backward node are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackwardAgg {
    #[default]
    Max,
    Min,
}

impl std::str::FromStr for BackwardAgg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "max" => Ok(BackwardAgg::Max),
            "min" => Ok(BackwardAgg::Min),
            other => Err(format!("unknown backward aggregation `{other}` (expected max or min)")),
        }
    }
}

impl std::fmt::Display for BackwardAgg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BackwardAgg::Max => "max",
            BackwardAgg::Min => "min",
        })
    }
}

/// Aggregated residuum `μ_f ⇒ r_B(w')` over the candidate actions.
pub fn backward_requirement(
    agg: BackwardAgg,
    candidates: &[(Degree, Degree)],
    kind: TNormKind,
) -> Result<Degree, SearchError> {
    let residua = candidates.iter().map(|(mu, req)| residuum(kind, *mu, *req));
    let folded = match agg {
        BackwardAgg::Max => residua.reduce(|a, b| if b > a { b } else { a }),
        BackwardAgg::Min => residua.reduce(|a, b| if b < a { b } else { a }),
    };
    folded.ok_or(SearchError::EmptyCandidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{facts, Atom};

    fn d(v: f64) -> Degree {
        Degree::new(v).unwrap()
    }

    #[test]
    fn requirement_examples() {
        let cands = [(d(0.9), d(0.8)), (d(0.7), d(0.8))];
        // residua enumerated by hand: min(1, 1-0.9+0.8) and min(1, 1-0.7+0.8)
        let each: Vec<f64> = cands
            .iter()
            .map(|(a, b)| (1.0 - a.value() + b.value()).min(1.0))
            .collect();
        assert!((each[0] - 0.9).abs() < 1e-12 && each[1] == 1.0);
        let kind = TNormKind::Lukasiewicz;
        assert_eq!(
            backward_requirement(BackwardAgg::Max, &cands, kind).unwrap(),
            Degree::ONE
        );
        let min = backward_requirement(BackwardAgg::Min, &cands, kind).unwrap();
        assert!((min.value() - 0.9).abs() < 1e-12);
        for agg in [BackwardAgg::Max, BackwardAgg::Min] {
            assert_eq!(
                backward_requirement(agg, &[(Degree::ONE, d(0.37))], kind).unwrap(),
                d(0.37)
            );
        }
        assert!(matches!(
            backward_requirement(BackwardAgg::Max, &[], kind),
            Err(SearchError::EmptyCandidates)
        ));
    }

    #[test]
    fn single_action_requirements() {
        let kind = TNormKind::Lukasiewicz;
        let r = backward_requirement(BackwardAgg::Max, &[(d(0.9), d(0.8))], kind).unwrap();
        assert!((r.value() - 0.9).abs() < 1e-12);
        let r = backward_requirement(BackwardAgg::Max, &[(d(0.7), d(0.8))], kind).unwrap();
        assert_eq!(r, Degree::ONE);
    }

    fn goal(required: &[&str]) -> Condition {
        Condition {
            required_facts: facts(required.iter().copied()),
            ..Default::default()
        }
    }

    #[test]
    fn regression_replaces_achieved_facts_with_preconditions() {
        let mut a = Action::new("bake");
        a.required_facts = facts(["dough"]);
        a.add_facts = facts(["bread"]);
        a.del_facts = facts(["dough"]);
        a.resource_needs.insert("heat".into(), 2.0);
        a.resource_deltas.insert("heat".into(), -2.0);
        a.duration = 30.0;
        let c = goal(&["bread", "clean"]);
        assert!(c.relevant(&a));
        let r = c.regress(&a, &LogicalConstraints::default(), Some(60.0)).unwrap();
        assert_eq!(r.required_facts, facts(["clean", "dough"]));
        assert_eq!(r.resource_mins["heat"], 2.0);
        assert_eq!(r.remaining_time_min, 30.0);
        assert!(r.regress(&a, &LogicalConstraints::default(), Some(50.0)).is_none());
    }

    #[test]
    fn regression_raises_minimum_by_consumption() {
        let mut a = Action::new("use");
        a.resource_deltas.insert("flour".into(), -1.0);
        let mut c = goal(&[]);
        c.resource_mins.insert("flour".into(), 2.0);
        let r = c.regress(&a, &LogicalConstraints::default(), None).unwrap();
        assert_eq!(r.resource_mins["flour"], 3.0);

        let mut buy = Action::new("buy");
        buy.resource_deltas.insert("flour".into(), 5.0);
        assert!(c.relevant(&buy));
        let r = c.regress(&buy, &LogicalConstraints::default(), None).unwrap();
        assert!(!r.resource_mins.contains_key("flour"));
    }

    #[test]
    fn deleting_a_required_fact_discards() {
        let mut a = Action::new("eat");
        a.del_facts = facts(["cake"]);
        a.add_facts = facts(["full"]);
        assert!(goal(&["cake", "full"])
            .regress(&a, &LogicalConstraints::default(), None)
            .is_none());
    }

    #[test]
    fn unsatisfiable_regression_discards() {
        let mut a = Action::new("a");
        a.add_facts = facts(["x"]);
        a.required_facts = facts(["p"]);
        let mut c = goal(&["x"]);
        c.forbidden_facts = facts(["p"]);
        assert!(c.regress(&a, &LogicalConstraints::default(), None).is_none());

        let mut lc = LogicalConstraints::default();
        lc.add_mutex(Atom::nullary("p"), Atom::nullary("q"));
        let c = goal(&["x", "q"]);
        assert!(c.regress(&a, &lc, None).is_none());
    }
}
