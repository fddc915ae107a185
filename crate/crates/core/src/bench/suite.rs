//! Synthetic missing-substitute recipe suite.
//!
//! Each instance is a chain of `length` preparation steps. Steps whose
//! ingredient is missing offer several substitute variants instead of one
//! regular action; some substitutes trigger an allergen and are crisp-infeasible.
//! The table oracle holds the true degrees, and oracle noise stands in for an
//! unreliable grader.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::acceptance::AlphaPolicy;
use crate::chunking::{build_macros, DEFAULT_MAX_CHUNK};
use crate::fuzzy::Degree;
use crate::grounding::{OracleSpec, TableEntry, VaguePredicate};
use crate::world::{facts, Action, Atom, Domain, FactPredicate, Goal, LogicalConstraints, Problem, TemporalBudget};

pub const SUITABLE: &str = "suitable";
pub const ALLERGEN: &str = "allergen";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub lengths: Vec<usize>,
    pub missing: Vec<usize>,
    pub candidates: Vec<usize>,
    pub replicates: usize,
    /// Beta(a, b) for regular steps.
    pub regular: (f64, f64),
    /// Beta(a, b) for substitutes.
    pub substitute: (f64, f64),
    pub noise_std: f64,
    /// Chance that one oracle sample is an off-rubric uniform draw.
    pub outlier_rate: f64,
    /// Probability that a substitute conflicts with a dietary constraint.
    pub conflict_rate: f64,
    /// Consecutive steps sharing a chunk tag.
    pub phase_len: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        SuiteSpec {
            lengths: vec![1, 3, 5, 7, 9, 11],
            missing: vec![0, 1, 2],
            candidates: vec![1, 3, 5, 7],
            replicates: 8,
            regular: (40.0, 2.0),
            substitute: (8.0, 2.0),
            noise_std: 0.2,
            outlier_rate: 0.0,
            conflict_rate: 0.25,
            phase_len: 2,
            alpha: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchInstance {
    pub id: String,
    pub domain: Domain,
    pub problem: Problem,
}

fn done(i: usize) -> Atom {
    Atom::new("done", vec![format!("s{i}")])
}

fn beta(rng: &mut ChaCha8Rng, (a, b): (f64, f64)) -> f64 {
    Beta::new(a, b).expect("valid beta parameters").sample(rng)
}

/// Generates every stratum of `spec`; missing counts above the length are skipped.
///
/// Instances that differ only in length share their per-position draws, so
/// length strata are compared on common random numbers.
pub fn generate_suite(spec: &SuiteSpec) -> Vec<BenchInstance> {
    let longest = spec.lengths.iter().copied().max().unwrap_or(0);
    let mut out = Vec::new();
    for &length in &spec.lengths {
        for &missing in spec.missing.iter().filter(|&&m| m <= length) {
            for &candidates in &spec.candidates {
                for rep in 0..spec.replicates {
                    let group = format!("m{missing}-c{candidates}-r{rep}");
                    let draws = Draws::new(spec, longest, candidates, spec.seed ^ fxhash(&group));
                    let id = format!("recipe-l{length}-{group}");
                    out.push(build(spec, &id, length, missing, candidates, &draws));
                }
            }
        }
    }
    out
}

pub(crate) fn fxhash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h: u64, b| {
        (h ^ b as u64).wrapping_mul(0x100_0000_01b3)
    })
}

/// Random choices for every step position of the longest instance in a group.
struct Draws {
    /// Step positions in the order they go missing.
    order: Vec<usize>,
    regular: Vec<f64>,
    /// Per position: (degree, conflicts) for each substitute.
    substitutes: Vec<Vec<(f64, bool)>>,
}

impl Draws {
    fn new(spec: &SuiteSpec, positions: usize, candidates: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let order = sample(&mut rng, positions, positions)
            .into_iter()
            .map(|i| i + 1)
            .collect();
        let mut regular = Vec::with_capacity(positions);
        let mut substitutes = Vec::with_capacity(positions);
        for _ in 0..positions {
            regular.push(beta(&mut rng, spec.regular));
            let safe = rng.random_range(0..candidates.max(1));
            let subs = (0..candidates.max(1))
                .map(|j| {
                    let conflict = j != safe && rng.random_bool(spec.conflict_rate);
                    // conflicting substitutes look attractive to a grader
                    let degree = beta(&mut rng, if conflict { (9.0, 1.0) } else { spec.substitute });
                    (degree, conflict)
                })
                .collect();
            substitutes.push(subs);
        }
        Draws {
            order,
            regular,
            substitutes,
        }
    }
}

pub fn generate_instance(
    spec: &SuiteSpec,
    id: &str,
    length: usize,
    missing: usize,
    candidates: usize,
    seed: u64,
) -> BenchInstance {
    let draws = Draws::new(spec, length, candidates, seed);
    build(spec, id, length, missing, candidates, &draws)
}

fn build(spec: &SuiteSpec, id: &str, length: usize, missing: usize, candidates: usize, draws: &Draws) -> BenchInstance {
    let missing_steps: Vec<usize> = draws
        .order
        .iter()
        .copied()
        .filter(|&i| i <= length)
        .take(missing)
        .collect();
    let mut actions = Vec::new();
    let mut table = Vec::new();
    let mut truth = BTreeMap::new();
    let phase_len = spec.phase_len.max(1);
    for i in 1..=length {
        let tag = format!("phase{}", (i - 1) / phase_len);
        let variants: Vec<(String, f64, bool)> = if missing_steps.contains(&i) {
            draws.substitutes[i - 1]
                .iter()
                .enumerate()
                .map(|(j, &(d, c))| (format!("step{i}-sub{}", j + 1), d, c))
                .collect()
        } else {
            vec![(format!("step{i}"), draws.regular[i - 1], false)]
        };
        for (aid, degree, conflict) in variants {
            let mut a = Action::new(aid.clone());
            a.class = Some(
                if missing_steps.contains(&i) {
                    "substitute"
                } else {
                    "regular"
                }
                .into(),
            );
            a.required_facts.insert(done(i - 1));
            a.del_facts.insert(done(i - 1));
            a.add_facts.insert(done(i));
            if conflict {
                a.add_facts.insert(Atom::nullary(ALLERGEN));
            }
            a.duration = 1.0;
            a.graded_predicates = vec![SUITABLE.into()];
            a.chunk_tag = Some(tag.clone());
            a.goal_relevant = i == length;
            let degree = Degree::saturating(degree);
            truth.insert(aid.clone(), degree);
            table.push(TableEntry {
                predicate: SUITABLE.into(),
                action: aid,
                degree,
            });
            actions.push(a);
        }
    }
    let mut constraints = LogicalConstraints::default();
    constraints.forbidden.insert(Atom::nullary(ALLERGEN));
    let mut domain = Domain {
        name: format!("{id}-domain"),
        resources: Vec::new(),
        fact_predicates: vec![
            FactPredicate {
                name: "done".into(),
                arity: 1,
            },
            FactPredicate {
                name: ALLERGEN.into(),
                arity: 0,
            },
        ],
        predicates: vec![VaguePredicate::new(
            SUITABLE,
            "How well does this step (or step sequence) fit the recipe, given the ingredients at hand?",
        )],
        constraints,
        actions,
        macro_estimates: BTreeMap::new(),
        oracle: OracleSpec {
            noise_std: spec.noise_std,
            outlier_rate: spec.outlier_rate,
            strict: true,
            ..OracleSpec::default()
        },
    };
    // a coherent chunk is judged as a whole: as good as its weakest member
    let (macros, _) = build_macros(&domain, DEFAULT_MAX_CHUNK);
    for m in &macros {
        let degree = m
            .members
            .iter()
            .map(|id| truth[id])
            .fold(Degree::ONE, |a, b| if b < a { b } else { a });
        table.push(TableEntry {
            predicate: SUITABLE.into(),
            action: m.id.clone(),
            degree,
        });
    }
    domain.oracle.table = table;

    let initial = domain.state(
        &BTreeMap::new(),
        facts([done(0).to_string()]),
        TemporalBudget {
            elapsed: 0.0,
            budget: Some(length as f64),
        },
    );
    let mut meta = BTreeMap::new();
    meta.insert("length".to_string(), length.to_string());
    meta.insert("missing".to_string(), missing.to_string());
    meta.insert("candidates".to_string(), candidates.to_string());
    let problem = Problem {
        name: id.to_string(),
        initial,
        goal: Goal {
            required_facts: facts([done(length).to_string()]),
            ..Goal::default()
        },
        alpha: AlphaPolicy::fixed(spec.alpha),
        meta,
    };
    BenchInstance {
        id: id.to_string(),
        domain,
        problem,
    }
}
