//! Crisp world model: states `w = (r, s, l, t)`, actions, goals, and hard-constraint checks.
//!
//! Resources, logical constraints and the temporal budget are hard: a
//! transition that violates any of them is infeasible no matter what degree
//! the grounding assigns to it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acceptance::AlphaPolicy;
use crate::grounding::{OracleSpec, VaguePredicate};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("action `{action}` references unknown resource `{resource}`")]
    UnknownResource { action: String, resource: String },
    #[error("action `{action}` is not applicable: {reason}")]
    NotApplicable { action: String, reason: String },
}

/// A ground atom such as `has(flour)` or `dough_ready`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<String>) -> Self {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    pub fn nullary(predicate: impl Into<String>) -> Self {
        Atom::new(predicate, Vec::new())
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() {
            f.write_str(&self.predicate)
        } else {
            write!(f, "{}({})", self.predicate, self.args.join(","))
        }
    }
}

fn valid_symbol(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | ':' | '+' | '/'))
}

impl FromStr for Atom {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            None => (s, Vec::new()),
            Some(open) => {
                let rest = &s[open + 1..];
                let inner = rest
                    .strip_suffix(')')
                    .ok_or_else(|| format!("atom `{s}` is missing a closing parenthesis"))?;
                let args: Vec<String> = if inner.trim().is_empty() {
                    Vec::new()
                } else {
                    inner.split(',').map(|a| a.trim().to_string()).collect()
                };
                (s[..open].trim(), args)
            }
        };
        if !valid_symbol(name) {
            return Err(format!("invalid atom predicate `{name}` in `{s}`"));
        }
        if let Some(bad) = args.iter().find(|a| !valid_symbol(a)) {
            return Err(format!("invalid atom argument `{bad}` in `{s}`"));
        }
        Ok(Atom::new(name, args))
    }
}

impl Serialize for Atom {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Atom {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub type FactSet = BTreeSet<Atom>;
pub type ResourceVector = BTreeMap<String, f64>;

/// Parses a list of atom strings; panics on malformed input. Intended for tests and fixtures.
pub fn facts<I, S>(atoms: I) -> FactSet
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    atoms
        .into_iter()
        .map(|a| a.as_ref().parse().expect("malformed atom"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LogicalConstraints {
    #[serde(default)]
    pub forbidden: FactSet,
    #[serde(default)]
    pub required_invariant: FactSet,
    /// Unordered pairs; stored with the smaller atom first.
    #[serde(default)]
    pub mutex: BTreeSet<(Atom, Atom)>,
}

impl LogicalConstraints {
    pub fn add_mutex(&mut self, a: Atom, b: Atom) {
        if a <= b {
            self.mutex.insert((a, b));
        } else {
            self.mutex.insert((b, a));
        }
    }

    /// Violations of these constraints by a fact set.
    pub fn check(&self, facts: &FactSet) -> Vec<Violation> {
        let mut out = Vec::new();
        for atom in self.forbidden.intersection(facts) {
            out.push(Violation::logic(format!("forbidden atom `{atom}` holds")));
        }
        for atom in self.required_invariant.difference(facts) {
            out.push(Violation::logic(format!("invariant atom `{atom}` does not hold")));
        }
        for (a, b) in &self.mutex {
            if facts.contains(a) && facts.contains(b) {
                out.push(Violation::logic(format!("mutex atoms `{a}` and `{b}` co-hold")));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalBudget {
    pub elapsed: f64,
    /// `None` means unbounded.
    pub budget: Option<f64>,
}

impl TemporalBudget {
    pub fn unbounded() -> Self {
        TemporalBudget {
            elapsed: 0.0,
            budget: None,
        }
    }

    pub fn fits(&self, extra: f64) -> bool {
        match self.budget {
            Some(b) => self.elapsed + extra <= b,
            None => true,
        }
    }
}

impl Default for TemporalBudget {
    fn default() -> Self {
        TemporalBudget::unbounded()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViolationKind {
    Resource,
    Logic,
    Temporal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub description: String,
    /// 1-based plan step at which the violation was detected, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
}

impl Violation {
    pub fn resource(description: impl Into<String>) -> Self {
        Violation {
            kind: ViolationKind::Resource,
            description: description.into(),
            step: None,
        }
    }

    pub fn logic(description: impl Into<String>) -> Self {
        Violation {
            kind: ViolationKind::Logic,
            description: description.into(),
            step: None,
        }
    }

    pub fn temporal(description: impl Into<String>) -> Self {
        Violation {
            kind: ViolationKind::Temporal,
            description: description.into(),
            step: None,
        }
    }

    pub fn at_step(mut self, step: usize) -> Self {
        self.step = Some(step);
        self
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step {
            Some(step) => write!(f, "{:?} at step {}: {}", self.kind, step, self.description),
            None => write!(f, "{:?}: {}", self.kind, self.description),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub resources: ResourceVector,
    pub facts: FactSet,
    pub logic: LogicalConstraints,
    pub time: TemporalBudget,
}

impl State {
    pub fn new(resources: ResourceVector, facts: FactSet) -> Self {
        State {
            resources,
            facts,
            logic: LogicalConstraints::default(),
            time: TemporalBudget::unbounded(),
        }
    }

    pub fn resource(&self, name: &str) -> f64 {
        self.resources.get(name).copied().unwrap_or(0.0)
    }

    /// Canonical text form used for cache keys and prompts: sorted facts and
    /// resources rounded to 1e-6.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        out.push_str("facts:");
        for (i, f) in self.facts.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&f.to_string());
        }
        out.push_str(";resources:");
        for (i, (name, q)) in self.resources.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let rounded = (q * 1e6).round() / 1e6;
            out.push_str(&format!("{name}={rounded}"));
        }
        out
    }

    /// Exact equality key for duplicate detection (all crisp components).
    pub fn identity_key(&self) -> String {
        let mut key = self.canonical();
        for (name, q) in &self.resources {
            key.push_str(&format!("|{name}:{:x}", q.to_bits()));
        }
        key.push_str(&format!("|t:{:x}", self.time.elapsed.to_bits()));
        key
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Action {
    pub id: String,
    /// Calibration class; defaults to the action id when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    #[serde(default)]
    pub resource_needs: BTreeMap<String, f64>,
    #[serde(default)]
    pub resource_deltas: BTreeMap<String, f64>,
    #[serde(default)]
    pub required_facts: FactSet,
    #[serde(default)]
    pub forbidden_facts: FactSet,
    #[serde(default)]
    pub add_facts: FactSet,
    #[serde(default)]
    pub del_facts: FactSet,
    #[serde(default)]
    pub duration: f64,
    #[serde(default)]
    pub graded_predicates: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_tag: Option<String>,
    #[serde(default)]
    pub goal_relevant: bool,
}

impl Action {
    pub fn new(id: impl Into<String>) -> Self {
        Action {
            id: id.into(),
            class: None,
            resource_needs: BTreeMap::new(),
            resource_deltas: BTreeMap::new(),
            required_facts: FactSet::new(),
            forbidden_facts: FactSet::new(),
            add_facts: FactSet::new(),
            del_facts: FactSet::new(),
            duration: 0.0,
            graded_predicates: Vec::new(),
            chunk_tag: None,
            goal_relevant: false,
        }
    }

    pub fn calibration_class(&self) -> &str {
        self.class.as_deref().unwrap_or(&self.id)
    }

    pub fn referenced_resources(&self) -> impl Iterator<Item = &String> {
        self.resource_needs.keys().chain(self.resource_deltas.keys())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Goal {
    #[serde(default)]
    pub required_facts: FactSet,
    #[serde(default)]
    pub resource_mins: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline: Option<f64>,
}

/// All hard-constraint violations of `state`; empty iff the state is hard-feasible.
pub fn violates_hard(state: &State) -> Vec<Violation> {
    let mut out = Vec::new();
    for (name, q) in &state.resources {
        if !q.is_finite() {
            out.push(Violation::resource(format!("resource `{name}` is not finite")));
        } else if *q < 0.0 {
            out.push(Violation::resource(format!("resource `{name}` is negative ({q})")));
        }
    }
    out.extend(state.logic.check(&state.facts));
    let t = &state.time;
    if !t.elapsed.is_finite() || t.elapsed < 0.0 {
        out.push(Violation::temporal(format!("elapsed time {} is invalid", t.elapsed)));
    } else if let Some(budget) = t.budget {
        if t.elapsed > budget {
            out.push(Violation::temporal(format!(
                "elapsed time {} exceeds budget {}",
                t.elapsed, budget
            )));
        }
    }
    out
}

fn check_resources_known(state: &State, action: &Action) -> Result<(), WorldError> {
    for name in action.referenced_resources() {
        if !state.resources.contains_key(name) {
            return Err(WorldError::UnknownResource {
                action: action.id.clone(),
                resource: name.clone(),
            });
        }
    }
    Ok(())
}

/// The first reason `action` cannot be applied in `state`, or `None` if it can.
pub fn applicability_failure(state: &State, action: &Action) -> Result<Option<Violation>, WorldError> {
    check_resources_known(state, action)?;
    for (name, need) in &action.resource_needs {
        let have = state.resource(name);
        if have < *need {
            return Ok(Some(Violation::resource(format!(
                "`{}` needs {need} of `{name}`, have {have}",
                action.id
            ))));
        }
    }
    if let Some(missing) = action.required_facts.difference(&state.facts).next() {
        return Ok(Some(Violation::logic(format!(
            "`{}` requires `{missing}`, which does not hold",
            action.id
        ))));
    }
    if let Some(present) = action.forbidden_facts.intersection(&state.facts).next() {
        return Ok(Some(Violation::logic(format!(
            "`{}` forbids `{present}`, which holds",
            action.id
        ))));
    }
    if !state.time.fits(action.duration) {
        return Ok(Some(Violation::temporal(format!(
            "`{}` takes {} but only {} of the budget remains",
            action.id,
            action.duration,
            state.time.budget.unwrap_or(f64::INFINITY) - state.time.elapsed
        ))));
    }
    let post = apply_unchecked(state, action);
    if let Some(v) = violates_hard(&post).into_iter().next() {
        return Ok(Some(Violation {
            description: format!("after `{}`: {}", action.id, v.description),
            ..v
        }));
    }
    Ok(None)
}

pub fn crisp_applicable(state: &State, action: &Action) -> Result<bool, WorldError> {
    Ok(applicability_failure(state, action)?.is_none())
}

fn apply_unchecked(state: &State, action: &Action) -> State {
    let mut next = state.clone();
    for (name, delta) in &action.resource_deltas {
        *next.resources.entry(name.clone()).or_insert(0.0) += delta;
    }
    for atom in &action.del_facts {
        next.facts.remove(atom);
    }
    for atom in &action.add_facts {
        next.facts.insert(atom.clone());
    }
    next.time.elapsed += action.duration;
    next
}

/// Applies `action`; fails explicitly if it is not crisp-applicable.
pub fn apply(state: &State, action: &Action) -> Result<State, WorldError> {
    if let Some(v) = applicability_failure(state, action)? {
        return Err(WorldError::NotApplicable {
            action: action.id.clone(),
            reason: v.to_string(),
        });
    }
    Ok(apply_unchecked(state, action))
}

pub fn goal_satisfied(state: &State, goal: &Goal) -> bool {
    goal.required_facts.is_subset(&state.facts)
        && goal
            .resource_mins
            .iter()
            .all(|(name, min)| state.resource(name) >= *min)
        && goal.deadline.is_none_or(|d| state.time.elapsed <= d)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceDecl {
    pub name: String,
    #[serde(default)]
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactPredicate {
    pub name: String,
    #[serde(default)]
    pub arity: usize,
}

/// A validated planning domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub name: String,
    pub resources: Vec<ResourceDecl>,
    pub fact_predicates: Vec<FactPredicate>,
    pub predicates: Vec<VaguePredicate>,
    pub constraints: LogicalConstraints,
    pub actions: Vec<Action>,
    /// Empirical membership estimates for macro actions, keyed by macro id.
    #[serde(default)]
    pub macro_estimates: BTreeMap<String, crate::Degree>,
    #[serde(default)]
    pub oracle: OracleSpec,
}

impl Domain {
    pub fn action(&self, id: &str) -> Option<&Action> {
        self.actions.iter().find(|a| a.id == id)
    }

    pub fn predicate(&self, id: &str) -> Option<&VaguePredicate> {
        self.predicates.iter().find(|p| p.id == id)
    }

    pub fn has_resource(&self, name: &str) -> bool {
        self.resources.iter().any(|r| r.name == name)
    }

    pub fn knows_fact(&self, atom: &Atom) -> bool {
        self.fact_predicates
            .iter()
            .any(|p| p.name == atom.predicate && p.arity == atom.arity())
    }

    /// Builds a state with every declared resource present (defaulting to 0).
    pub fn state(&self, resources: &BTreeMap<String, f64>, facts: FactSet, time: TemporalBudget) -> State {
        let mut r = ResourceVector::new();
        for decl in &self.resources {
            r.insert(decl.name.clone(), resources.get(&decl.name).copied().unwrap_or(0.0));
        }
        State {
            resources: r,
            facts,
            logic: self.constraints.clone(),
            time,
        }
    }
}

/// A validated problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub name: String,
    pub initial: State,
    pub goal: Goal,
    pub alpha: AlphaPolicy,
    /// Free-form labels (used by the benchmark harness for binning).
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}
