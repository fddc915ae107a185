//! Small random planning problems for cross-checking the planner against enumeration.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::acceptance::{AlphaPolicy, Criticality};
use crate::fuzzy::Degree;
use crate::grounding::{OracleSpec, TableEntry, VaguePredicate};
use crate::world::{
    violates_hard, Action, Atom, Domain, FactPredicate, FactSet, Goal, LogicalConstraints, Problem, ResourceDecl,
    TemporalBudget,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSpec {
    pub max_actions: usize,
    pub facts: usize,
    /// Chance that an instance uses an adaptive threshold.
    pub adaptive_rate: f64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec {
            max_actions: 4,
            facts: 5,
            adaptive_rate: 0.25,
        }
    }
}

fn grid(rng: &mut ChaCha8Rng, lo: u32, hi: u32) -> f64 {
    // multiples of 0.05
    rng.random_range(lo..=hi) as f64 * 0.05
}

fn subset(rng: &mut ChaCha8Rng, atoms: &[Atom], p: f64) -> FactSet {
    atoms.iter().filter(|_| rng.random_bool(p)).cloned().collect()
}

/// A problem with at most `max_actions` ground actions over `facts` nullary atoms,
/// one resource, an optional time budget, an optional mutex, and a noise-free table oracle.
pub fn random_instance(spec: &RandomSpec, seed: u64) -> (Domain, Problem) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let atoms: Vec<Atom> = (0..spec.facts).map(|i| Atom::nullary(format!("f{i}"))).collect();
    let predicates = vec![VaguePredicate::new("apt", "fit"), VaguePredicate::new("safe", "risk")];
    let n = rng.random_range(1..=spec.max_actions.max(1));
    let mut actions = Vec::new();
    let mut table = Vec::new();
    for i in 0..n {
        let mut a = Action::new(format!("a{i}"));
        a.required_facts = subset(&mut rng, &atoms, 0.25);
        a.forbidden_facts = subset(&mut rng, &atoms, 0.1)
            .difference(&a.required_facts)
            .cloned()
            .collect();
        let adds = rng.random_range(1..=2);
        for _ in 0..adds {
            a.add_facts.insert(atoms.choose(&mut rng).unwrap().clone());
        }
        a.del_facts = subset(&mut rng, &atoms, 0.25)
            .difference(&a.add_facts)
            .cloned()
            .collect();
        match rng.random_range(0..3) {
            0 => {
                a.resource_needs.insert("fuel".into(), 1.0);
                a.resource_deltas.insert("fuel".into(), -1.0);
            }
            1 => {
                a.resource_deltas.insert("fuel".into(), 1.0);
            }
            _ => {}
        }
        a.duration = rng.random_range(0..=2) as f64;
        for p in &predicates {
            if rng.random_bool(0.6) {
                a.graded_predicates.push(p.id.clone());
                table.push(TableEntry {
                    predicate: p.id.clone(),
                    action: a.id.clone(),
                    degree: Degree::saturating(grid(&mut rng, 6, 20)),
                });
            }
        }
        actions.push(a);
    }
    let mut constraints = LogicalConstraints::default();
    if rng.random_bool(0.3) {
        let a = atoms.choose(&mut rng).unwrap().clone();
        let b = atoms.choose(&mut rng).unwrap().clone();
        if a != b {
            constraints.add_mutex(a, b);
        }
    }
    let domain = Domain {
        name: format!("random-{seed}"),
        resources: vec![ResourceDecl {
            name: "fuel".into(),
            unit: String::new(),
        }],
        fact_predicates: (0..spec.facts)
            .map(|i| FactPredicate {
                name: format!("f{i}"),
                arity: 0,
            })
            .collect(),
        predicates,
        constraints,
        actions,
        macro_estimates: BTreeMap::new(),
        oracle: OracleSpec {
            table,
            strict: true,
            ..OracleSpec::default()
        },
    };

    let mut initial_facts = subset(&mut rng, &atoms, 0.3);
    let mut resources = BTreeMap::new();
    resources.insert("fuel".to_string(), rng.random_range(0..=3) as f64);
    let budget = rng.random_bool(0.5).then(|| rng.random_range(2..=8) as f64);
    let mut initial = domain.state(
        &resources,
        initial_facts.clone(),
        TemporalBudget { elapsed: 0.0, budget },
    );
    while !violates_hard(&initial).is_empty() {
        let first = initial_facts
            .iter()
            .next()
            .cloned()
            .expect("empty fact set satisfies mutexes");
        initial_facts.remove(&first);
        initial.facts = initial_facts.clone();
    }
    let mut goal = Goal::default();
    for _ in 0..rng.random_range(1..=2) {
        goal.required_facts.insert(atoms.choose(&mut rng).unwrap().clone());
    }
    let base = Degree::saturating(grid(&mut rng, 2, 18));
    let alpha = if rng.random_bool(spec.adaptive_rate) {
        AlphaPolicy::Adaptive {
            base,
            criticality: *Criticality::ALL.choose(&mut rng).unwrap(),
        }
    } else {
        AlphaPolicy::Fixed { alpha: base }
    };
    let problem = Problem {
        name: format!("random-{seed}"),
        initial,
        goal,
        alpha,
        meta: BTreeMap::new(),
    };
    (domain, problem)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_reproducible_and_feasible() {
        let spec = RandomSpec::default();
        for seed in 0..50 {
            let (d, p) = random_instance(&spec, seed);
            assert_eq!((d.clone(), p.clone()), random_instance(&spec, seed));
            assert!(d.actions.len() <= 4);
            assert!(violates_hard(&p.initial).is_empty());
        }
    }
}
