use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::VaguePredicate;
use crate::fuzzy::Degree;
use crate::world::{Action, FactSet, State};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("no table entry for predicate `{predicate}` and action `{action}`")]
    MissingEntry { predicate: String, action: String },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("unparseable reply: {0:?}")]
    Unparseable(String),
    #[error("{0}")]
    Other(String),
}

impl OracleError {
    pub fn is_transient(&self) -> bool {
        matches!(self, OracleError::Transport(_))
    }
}

/// One grounding query.
#[derive(Debug, Clone, Copy)]
pub struct Query<'a> {
    pub predicate: &'a VaguePredicate,
    pub state: &'a State,
    pub action: &'a Action,
}

/// Anything that maps a (predicate, state, action) query to a raw judgment.
///
/// Implementations must tolerate concurrent calls. The returned value is
/// untrusted: the caller clamps it into `[0, 1]`.
pub trait MembershipOracle: Send + Sync {
    fn kind(&self) -> &'static str;

    fn sample(&self, query: &Query<'_>, seed: u64) -> Result<f64, OracleError>;

    /// The prompt that would be sent for `query`, for oracles that use one.
    fn prompt(&self, _query: &Query<'_>) -> Option<String> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub predicate: String,
    pub action: String,
    pub degree: Degree,
}

/// Lookup table with optional seeded Gaussian noise and uniform outliers.
pub struct TableOracle {
    table: HashMap<(String, String), Degree>,
    noise: Option<Normal<f64>>,
    outlier_rate: f64,
    seed: u64,
    default: Degree,
    strict: bool,
    warned: Mutex<HashSet<(String, String)>>,
}

pub fn make_table_oracle(
    table: HashMap<(String, String), Degree>,
    noise_std: f64,
    seed: u64,
    default: Degree,
    strict: bool,
) -> TableOracle {
    let noise = if noise_std > 0.0 && noise_std.is_finite() {
        Some(Normal::new(0.0, noise_std).expect("valid std"))
    } else {
        None
    };
    TableOracle {
        table,
        noise,
        outlier_rate: 0.0,
        seed,
        default,
        strict,
        warned: Mutex::new(HashSet::new()),
    }
}

impl TableOracle {
    /// Replaces a noisy sample by a uniform draw with probability `rate`.
    pub fn with_outliers(mut self, rate: f64) -> Self {
        self.outlier_rate = if rate.is_finite() { rate.clamp(0.0, 1.0) } else { 0.0 };
        self
    }

    pub fn truth(&self, predicate: &str, action: &str) -> Option<Degree> {
        self.table.get(&(predicate.to_string(), action.to_string())).copied()
    }
}

impl MembershipOracle for TableOracle {
    fn kind(&self) -> &'static str {
        "table"
    }

    fn sample(&self, query: &Query<'_>, seed: u64) -> Result<f64, OracleError> {
        let key = (query.predicate.id.clone(), query.action.id.clone());
        let base = match self.table.get(&key) {
            Some(d) => d.value(),
            None if self.strict => {
                return Err(OracleError::MissingEntry {
                    predicate: key.0,
                    action: key.1,
                })
            }
            None => {
                if self.warned.lock().unwrap().insert(key.clone()) {
                    log::warn!(
                        "no table entry for ({}, {}); using default {}",
                        key.0,
                        key.1,
                        self.default
                    );
                }
                self.default.value()
            }
        };
        let value = if self.noise.is_none() && self.outlier_rate == 0.0 {
            base
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ seed);
            let jitter = self.noise.map_or(0.0, |n| n.sample(&mut rng));
            if self.outlier_rate > 0.0 && rng.random_bool(self.outlier_rate) {
                rng.random::<f64>()
            } else {
                base + jitter
            }
        };
        Ok(value.clamp(0.0, 1.0))
    }
}

/// A condition/degree pair for the rule oracle. Every populated field must hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicate: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    #[serde(default, skip_serializing_if = "FactSet::is_empty")]
    pub facts_present: FactSet,
    #[serde(default, skip_serializing_if = "FactSet::is_empty")]
    pub facts_absent: FactSet,
    #[serde(default, skip_serializing_if = "FactSet::is_empty")]
    pub action_adds: FactSet,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub resources_at_least: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub resources_below: BTreeMap<String, f64>,
    pub degree: Degree,
}

impl Rule {
    pub fn always(degree: Degree) -> Self {
        Rule {
            predicate: None,
            action: None,
            facts_present: FactSet::new(),
            facts_absent: FactSet::new(),
            action_adds: FactSet::new(),
            resources_at_least: BTreeMap::new(),
            resources_below: BTreeMap::new(),
            degree,
        }
    }

    pub fn matches(&self, query: &Query<'_>) -> bool {
        self.predicate.as_ref().is_none_or(|p| *p == query.predicate.id)
            && self.action.as_ref().is_none_or(|a| *a == query.action.id)
            && self.facts_present.is_subset(&query.state.facts)
            && self.facts_absent.is_disjoint(&query.state.facts)
            && self.action_adds.is_subset(&query.action.add_facts)
            && self
                .resources_at_least
                .iter()
                .all(|(r, q)| query.state.resource(r) >= *q)
            && self.resources_below.iter().all(|(r, q)| query.state.resource(r) < *q)
    }
}

/// First matching rule wins; no match gives `0.5`.
pub struct RuleOracle {
    rules: Vec<Rule>,
}

pub fn make_rule_oracle(rules: Vec<Rule>) -> RuleOracle {
    RuleOracle { rules }
}

impl RuleOracle {
    pub const DEFAULT: f64 = 0.5;

    pub fn evaluate(&self, query: &Query<'_>) -> Degree {
        self.rules
            .iter()
            .find(|r| r.matches(query))
            .map(|r| r.degree)
            .unwrap_or_else(|| Degree::new(Self::DEFAULT).unwrap())
    }
}

impl MembershipOracle for RuleOracle {
    fn kind(&self) -> &'static str {
        "rule"
    }

    fn sample(&self, query: &Query<'_>, _seed: u64) -> Result<f64, OracleError> {
        Ok(self.evaluate(query).value())
    }
}
