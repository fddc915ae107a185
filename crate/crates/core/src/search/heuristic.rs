//! State-to-condition distance used to order the forward frontier.

use serde::{Deserialize, Serialize};

use crate::world::{FactSet, State};

use super::regression::Condition;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceWeights {
    pub symbolic: f64,
    pub resource: f64,
    pub logic: f64,
    pub time: f64,
}

impl Default for DistanceWeights {
    fn default() -> Self {
        DistanceWeights {
            symbolic: 0.4,
            resource: 0.3,
            logic: 0.2,
            time: 0.1,
        }
    }
}

impl DistanceWeights {
    pub fn new(symbolic: f64, resource: f64, logic: f64, time: f64) -> Result<Self, String> {
        let w = DistanceWeights {
            symbolic,
            resource,
            logic,
            time,
        };
        w.check()?;
        Ok(w)
    }

    pub fn check(&self) -> Result<(), String> {
        let parts = [self.symbolic, self.resource, self.logic, self.time];
        if parts.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err("distance weights must be non-negative".into());
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(format!("distance weights must sum to 1 (got {sum})"));
        }
        Ok(())
    }
}

/// Anything that can score how far a state is from satisfying a condition.
pub trait Heuristic: Send + Sync {
    fn distance(&self, state: &State, condition: &Condition) -> f64;
}

/// `1 − |A ∩ B| / |A ∪ B|`, zero when both are empty.
pub fn jaccard_distance(a: &FactSet, b: &FactSet) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        1.0 - inter as f64 / union as f64
    }
}

pub fn resource_shortfall(state: &State, condition: &Condition) -> f64 {
    let total: f64 = condition.resource_mins.values().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let short: f64 = condition
        .resource_mins
        .iter()
        .map(|(name, min)| (min - state.resource(name)).max(0.0))
        .sum();
    (short / total).min(1.0)
}

pub fn logic_conflict(state: &State, condition: &Condition) -> f64 {
    if state.facts.iter().any(|a| condition.forbidden_facts.contains(a)) {
        return 1.0;
    }
    let mut merged = state.facts.clone();
    merged.extend(condition.required_facts.iter().cloned());
    let lc = &state.logic;
    let clash = merged.iter().any(|a| lc.forbidden.contains(a))
        || lc.mutex.iter().any(|(a, b)| merged.contains(a) && merged.contains(b));
    if clash {
        1.0
    } else {
        0.0
    }
}

pub fn time_shortfall(state: &State, condition: &Condition) -> f64 {
    match state.time.budget {
        Some(budget) if budget > 0.0 => {
            let over = state.time.elapsed + condition.remaining_time_min - budget;
            (over.max(0.0) / budget).min(1.0)
        }
        Some(_) if condition.remaining_time_min > 0.0 => 1.0,
        Some(_) => 0.0,
        None => 0.0,
    }
}

impl Heuristic for DistanceWeights {
    fn distance(&self, state: &State, condition: &Condition) -> f64 {
        self.symbolic * jaccard_distance(&state.facts, &condition.required_facts)
            + self.resource * resource_shortfall(state, condition)
            + self.logic * logic_conflict(state, condition)
            + self.time * time_shortfall(state, condition)
    }
}

pub fn distance(state: &State, condition: &Condition, weights: &DistanceWeights) -> f64 {
    weights.distance(state, condition)
}
