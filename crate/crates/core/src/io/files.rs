use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::acceptance::{AlphaPolicy, Criticality};
use crate::chunking::macro_id;
use crate::fuzzy::Degree;
use crate::grounding::{OracleSpec, VaguePredicate};
use crate::world::{
    violates_hard, Action, Atom, Domain, FactPredicate, Goal, LogicalConstraints, Problem, ResourceDecl, State,
    TemporalBudget,
};

use super::{from_json, Issue, LoadError};

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintsDoc {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    forbidden: Vec<Atom>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    required_invariant: Vec<Atom>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    mutex: Vec<(Atom, Atom)>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MacroEstimateDoc {
    members: Vec<String>,
    empirical_mu: Degree,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainDoc {
    name: String,
    #[serde(default)]
    resources: Vec<ResourceDecl>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    fact_predicates: Vec<FactPredicate>,
    #[serde(default)]
    predicates: Vec<VaguePredicate>,
    #[serde(default)]
    constraints: ConstraintsDoc,
    #[serde(default)]
    actions: Vec<Action>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    macro_estimates: Vec<MacroEstimateDoc>,
    #[serde(default)]
    oracle: OracleSpec,
}

fn finite_non_negative(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

/// Parses and validates a domain document.
pub fn parse_domain(text: &str) -> Result<Domain, LoadError> {
    let doc: DomainDoc = from_json(text)?;
    let mut issues = Vec::new();

    let mut resource_at: HashMap<&str, usize> = HashMap::new();
    for (i, r) in doc.resources.iter().enumerate() {
        if let Some(prev) = resource_at.insert(&r.name, i) {
            issues.push(Issue::new(
                format!("resources[{i}]"),
                format!("resource `{}` already declared at resources[{prev}]", r.name),
            ));
        }
    }
    let mut predicate_at: HashMap<&str, usize> = HashMap::new();
    for (i, p) in doc.predicates.iter().enumerate() {
        if let Some(prev) = predicate_at.insert(&p.id, i) {
            issues.push(Issue::new(
                format!("predicates[{i}]"),
                format!("vague predicate `{}` already declared at predicates[{prev}]", p.id),
            ));
        }
    }
    let mut action_at: HashMap<&str, usize> = HashMap::new();
    for (i, a) in doc.actions.iter().enumerate() {
        if let Some(prev) = action_at.insert(&a.id, i) {
            issues.push(Issue::new(
                format!("actions[{i}].id"),
                format!("duplicate action id `{}` (also at actions[{prev}])", a.id),
            ));
        }
        for (field, map) in [
            ("resource_needs", &a.resource_needs),
            ("resource_deltas", &a.resource_deltas),
        ] {
            for (name, q) in map {
                let path = format!("actions[{i}].{field}.{name}");
                if !resource_at.contains_key(name.as_str()) {
                    issues.push(Issue::new(path, format!("undeclared resource `{name}`")));
                } else if !q.is_finite() || (field == "resource_needs" && *q < 0.0) {
                    issues.push(Issue::new(path, format!("invalid quantity {q}")));
                }
            }
        }
        for (j, p) in a.graded_predicates.iter().enumerate() {
            if !predicate_at.contains_key(p.as_str()) {
                issues.push(Issue::new(
                    format!("actions[{i}].graded_predicates[{j}]"),
                    format!("unknown vague predicate `{p}`"),
                ));
            }
        }
        if !finite_non_negative(a.duration) {
            issues.push(Issue::new(
                format!("actions[{i}].duration"),
                "duration must be non-negative",
            ));
        }
        if let Some(atom) = a.add_facts.intersection(&a.del_facts).next() {
            issues.push(Issue::new(
                format!("actions[{i}]"),
                format!("`{atom}` is both added and deleted"),
            ));
        }
    }

    let c = &doc.constraints;
    for atom in &c.forbidden {
        if c.required_invariant.contains(atom) {
            issues.push(Issue::new(
                "constraints",
                format!("`{atom}` is both forbidden and a required invariant"),
            ));
        }
    }

    let fact_predicates = if doc.fact_predicates.is_empty() {
        infer_fact_predicates(&doc, &mut issues)
    } else {
        check_declared_atoms(&doc, &mut issues);
        doc.fact_predicates.clone()
    };

    for (i, e) in doc.oracle.table.iter().enumerate() {
        if !predicate_at.contains_key(e.predicate.as_str()) {
            issues.push(Issue::new(
                format!("oracle.table[{i}].predicate"),
                format!("unknown vague predicate `{}`", e.predicate),
            ));
        }
    }
    for (i, r) in doc.oracle.rules.iter().enumerate() {
        if let Some(p) = &r.predicate {
            if !predicate_at.contains_key(p.as_str()) {
                issues.push(Issue::new(
                    format!("oracle.rules[{i}].predicate"),
                    format!("unknown vague predicate `{p}`"),
                ));
            }
        }
    }
    if !finite_non_negative(doc.oracle.noise_std) {
        issues.push(Issue::new("oracle.noise_std", "noise must be non-negative"));
    }
    if !(0.0..=1.0).contains(&doc.oracle.outlier_rate) {
        issues.push(Issue::new("oracle.outlier_rate", "outlier rate must lie in [0, 1]"));
    }

    let mut macro_estimates = BTreeMap::new();
    for (i, m) in doc.macro_estimates.iter().enumerate() {
        if m.members.len() < 2 {
            issues.push(Issue::new(
                format!("macro_estimates[{i}].members"),
                "a macro needs at least two members",
            ));
        }
        for (j, id) in m.members.iter().enumerate() {
            if !action_at.contains_key(id.as_str()) {
                issues.push(Issue::new(
                    format!("macro_estimates[{i}].members[{j}]"),
                    format!("unknown action `{id}`"),
                ));
            }
        }
        macro_estimates.insert(macro_id(&m.members), m.empirical_mu);
    }

    if !issues.is_empty() {
        return Err(LoadError::Invalid(issues));
    }
    let mut constraints = LogicalConstraints {
        forbidden: c.forbidden.iter().cloned().collect(),
        required_invariant: c.required_invariant.iter().cloned().collect(),
        ..Default::default()
    };
    for (a, b) in &c.mutex {
        constraints.add_mutex(a.clone(), b.clone());
    }
    Ok(Domain {
        name: doc.name,
        resources: doc.resources,
        fact_predicates,
        predicates: doc.predicates,
        constraints,
        actions: doc.actions,
        macro_estimates,
        oracle: doc.oracle,
    })
}

fn domain_atoms(doc: &DomainDoc) -> Vec<(String, &Atom)> {
    let mut out = Vec::new();
    let c = &doc.constraints;
    out.extend(c.forbidden.iter().map(|a| ("constraints.forbidden".to_string(), a)));
    out.extend(
        c.required_invariant
            .iter()
            .map(|a| ("constraints.required_invariant".to_string(), a)),
    );
    for (a, b) in &c.mutex {
        out.push(("constraints.mutex".to_string(), a));
        out.push(("constraints.mutex".to_string(), b));
    }
    for (i, act) in doc.actions.iter().enumerate() {
        for (field, set) in [
            ("required_facts", &act.required_facts),
            ("forbidden_facts", &act.forbidden_facts),
            ("add_facts", &act.add_facts),
            ("del_facts", &act.del_facts),
        ] {
            out.extend(set.iter().map(|a| (format!("actions[{i}].{field}"), a)));
        }
    }
    out
}

fn infer_fact_predicates(doc: &DomainDoc, issues: &mut Vec<Issue>) -> Vec<FactPredicate> {
    let mut arity: BTreeMap<String, usize> = BTreeMap::new();
    for (path, atom) in domain_atoms(doc) {
        match arity.get(&atom.predicate) {
            Some(&n) if n != atom.arity() => issues.push(Issue::new(
                path,
                format!("`{}` used with arity {} and {}", atom.predicate, n, atom.arity()),
            )),
            Some(_) => {}
            None => {
                arity.insert(atom.predicate.clone(), atom.arity());
            }
        }
    }
    arity
        .into_iter()
        .map(|(name, arity)| FactPredicate { name, arity })
        .collect()
}

fn check_declared_atoms(doc: &DomainDoc, issues: &mut Vec<Issue>) {
    for (path, atom) in domain_atoms(doc) {
        let known = doc
            .fact_predicates
            .iter()
            .any(|p| p.name == atom.predicate && p.arity == atom.arity());
        if !known {
            issues.push(Issue::new(
                path,
                format!("`{atom}` does not match a declared fact predicate"),
            ));
        }
    }
}

pub fn write_domain(domain: &Domain) -> String {
    let doc = DomainDoc {
        name: domain.name.clone(),
        resources: domain.resources.clone(),
        fact_predicates: domain.fact_predicates.clone(),
        predicates: domain.predicates.clone(),
        constraints: ConstraintsDoc {
            forbidden: domain.constraints.forbidden.iter().cloned().collect(),
            required_invariant: domain.constraints.required_invariant.iter().cloned().collect(),
            mutex: domain.constraints.mutex.iter().cloned().collect(),
        },
        actions: domain.actions.clone(),
        macro_estimates: domain
            .macro_estimates
            .iter()
            .map(|(id, mu)| MacroEstimateDoc {
                members: id.split('+').map(str::to_string).collect(),
                empirical_mu: *mu,
            })
            .collect(),
        oracle: domain.oracle.clone(),
    };
    serde_json::to_string_pretty(&doc).expect("domain serializes")
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialDoc {
    #[serde(default)]
    resources: BTreeMap<String, f64>,
    #[serde(default)]
    facts: Vec<Atom>,
    #[serde(default)]
    elapsed: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdaptiveDoc {
    base: f64,
    #[serde(default)]
    criticality: Criticality,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemDoc {
    name: String,
    #[serde(default)]
    initial: InitialDoc,
    #[serde(default)]
    goal: Goal,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    time_budget: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    adaptive_alpha: Option<AdaptiveDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    meta: BTreeMap<String, String>,
}

const DEFAULT_ALPHA: f64 = 0.5;

fn degree_issue(path: &str, v: f64, issues: &mut Vec<Issue>) -> Degree {
    Degree::new(v).unwrap_or_else(|e| {
        issues.push(Issue::new(path, e.to_string()));
        Degree::ZERO
    })
}

/// Parses a problem against an already validated domain.
pub fn parse_problem(text: &str, domain: &Domain) -> Result<Problem, LoadError> {
    let doc: ProblemDoc = from_json(text)?;
    let mut issues = Vec::new();

    for (name, q) in &doc.initial.resources {
        let path = format!("initial.resources.{name}");
        if !domain.has_resource(name) {
            issues.push(Issue::new(path, format!("undeclared resource `{name}`")));
        } else if !q.is_finite() {
            issues.push(Issue::new(path, format!("invalid quantity {q}")));
        }
    }
    for (i, atom) in doc.initial.facts.iter().enumerate() {
        if !domain.knows_fact(atom) {
            issues.push(Issue::new(
                format!("initial.facts[{i}]"),
                format!("unknown fact `{atom}`"),
            ));
        }
    }
    for atom in &doc.goal.required_facts {
        if !domain.knows_fact(atom) {
            issues.push(Issue::new("goal.required_facts", format!("unknown fact `{atom}`")));
        }
    }
    for (name, q) in &doc.goal.resource_mins {
        if !domain.has_resource(name) {
            issues.push(Issue::new(
                format!("goal.resource_mins.{name}"),
                format!("undeclared resource `{name}`"),
            ));
        } else if !q.is_finite() {
            issues.push(Issue::new(
                format!("goal.resource_mins.{name}"),
                format!("invalid quantity {q}"),
            ));
        }
    }
    if let Some(b) = doc.time_budget {
        if !(b.is_finite() && b > 0.0) {
            issues.push(Issue::new("time_budget", "time budget must be positive"));
        }
    }
    if !finite_non_negative(doc.initial.elapsed) {
        issues.push(Issue::new("initial.elapsed", "elapsed time must be non-negative"));
    }
    let alpha = match (&doc.alpha, &doc.adaptive_alpha) {
        (Some(_), Some(_)) => {
            issues.push(Issue::new("alpha", "give either `alpha` or `adaptive_alpha`, not both"));
            AlphaPolicy::fixed(DEFAULT_ALPHA)
        }
        (Some(a), None) => AlphaPolicy::Fixed {
            alpha: degree_issue("alpha", *a, &mut issues),
        },
        (None, Some(ad)) => AlphaPolicy::Adaptive {
            base: degree_issue("adaptive_alpha.base", ad.base, &mut issues),
            criticality: ad.criticality,
        },
        (None, None) => AlphaPolicy::fixed(DEFAULT_ALPHA),
    };
    if !issues.is_empty() {
        return Err(LoadError::Invalid(issues));
    }

    let initial = domain.state(
        &doc.initial.resources,
        doc.initial.facts.into_iter().collect(),
        TemporalBudget {
            elapsed: doc.initial.elapsed,
            budget: doc.time_budget,
        },
    );
    let hard: Vec<Issue> = violates_hard(&initial)
        .into_iter()
        .map(|v| Issue::new("initial", format!("hard constraint violated: {}", v.description)))
        .collect();
    if !hard.is_empty() {
        return Err(LoadError::Invalid(hard));
    }
    Ok(Problem {
        name: doc.name,
        initial,
        goal: doc.goal,
        alpha,
        meta: doc.meta,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateDoc {
    #[serde(default)]
    resources: BTreeMap<String, f64>,
    #[serde(default)]
    facts: Vec<Atom>,
    #[serde(default)]
    elapsed: f64,
    #[serde(default)]
    time_budget: Option<f64>,
}

/// Parses a standalone state: the `initial` section of a problem plus an optional `time_budget`.
pub fn parse_state(text: &str, domain: &Domain) -> Result<State, LoadError> {
    let doc: StateDoc = from_json(text)?;
    let mut issues = Vec::new();
    for (name, q) in &doc.resources {
        if !domain.has_resource(name) {
            issues.push(Issue::new(
                format!("resources.{name}"),
                format!("undeclared resource `{name}`"),
            ));
        } else if !q.is_finite() {
            issues.push(Issue::new(format!("resources.{name}"), format!("invalid quantity {q}")));
        }
    }
    for (i, atom) in doc.facts.iter().enumerate() {
        if !domain.knows_fact(atom) {
            issues.push(Issue::new(format!("facts[{i}]"), format!("unknown fact `{atom}`")));
        }
    }
    if !finite_non_negative(doc.elapsed) {
        issues.push(Issue::new("elapsed", "elapsed time must be non-negative"));
    }
    if !issues.is_empty() {
        return Err(LoadError::Invalid(issues));
    }
    Ok(domain.state(
        &doc.resources,
        doc.facts.into_iter().collect(),
        TemporalBudget {
            elapsed: doc.elapsed,
            budget: doc.time_budget,
        },
    ))
}

pub fn write_problem(problem: &Problem) -> String {
    let (alpha, adaptive_alpha) = match problem.alpha {
        AlphaPolicy::Fixed { alpha } => (Some(alpha.value()), None),
        AlphaPolicy::Adaptive { base, criticality } => (
            None,
            Some(AdaptiveDoc {
                base: base.value(),
                criticality,
            }),
        ),
    };
    let doc = ProblemDoc {
        name: problem.name.clone(),
        initial: InitialDoc {
            resources: problem.initial.resources.clone(),
            facts: problem.initial.facts.iter().cloned().collect(),
            elapsed: problem.initial.time.elapsed,
        },
        goal: problem.goal.clone(),
        time_budget: problem.initial.time.budget,
        alpha,
        adaptive_alpha,
        meta: problem.meta.clone(),
    };
    serde_json::to_string_pretty(&doc).expect("problem serializes")
}
