//! Grounding of vague predicates into degrees.
//!
//! A [`MembershipOracle`] produces raw judgments for a (predicate, state, action)
//! query. The [`Grounder`] draws `k` samples with derived per-sample seeds,
//! clamps untrusted outputs, aggregates them with the median, and caches the
//! result for the lifetime of one planning episode.

mod calibration;
mod llm;
mod oracle;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fuzzy::{plan_membership, Degree, TNormKind};
use crate::world::{Action, Domain, State};

pub use calibration::{calibrate_value, CalibrationKey, CalibrationTable, DEFAULT_ETA, DEFAULT_MAX_STEP};
pub use llm::{parse_score, render_prompt, LlmConfig, LlmOracle};
pub use oracle::{
    make_rule_oracle, make_table_oracle, MembershipOracle, OracleError, Query, Rule, RuleOracle, TableEntry,
    TableOracle,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VaguePredicate {
    pub id: String,
    #[serde(default)]
    pub rubric: String,
}

impl VaguePredicate {
    pub fn new(id: impl Into<String>, rubric: impl Into<String>) -> Self {
        VaguePredicate {
            id: id.into(),
            rubric: rubric.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AggregationRule {
    #[default]
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregationPolicy {
    /// Aggregation width: number of oracle samples per query.
    pub k: usize,
    #[serde(default)]
    pub rule: AggregationRule,
}

impl Default for AggregationPolicy {
    fn default() -> Self {
        AggregationPolicy {
            k: 5,
            rule: AggregationRule::Median,
        }
    }
}

impl AggregationPolicy {
    pub fn with_k(k: usize) -> Self {
        AggregationPolicy {
            k,
            rule: AggregationRule::Median,
        }
    }
}

/// Oracle data carried by a domain file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSpec {
    #[serde(default)]
    pub table: Vec<TableEntry>,
    #[serde(default)]
    pub noise_std: f64,
    /// Chance that a noisy sample is an off-rubric uniform draw instead.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub outlier_rate: f64,
    #[serde(default = "half")]
    pub default_degree: Degree,
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub rules: Vec<Rule>,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

fn half() -> Degree {
    Degree::new(0.5).unwrap()
}

impl Default for OracleSpec {
    fn default() -> Self {
        OracleSpec {
            table: Vec::new(),
            noise_std: 0.0,
            outlier_rate: 0.0,
            default_degree: half(),
            strict: false,
            rules: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GroundingError {
    #[error("empty sample set")]
    EmptySamples,
    #[error("aggregation width k must be at least 1")]
    ZeroWidth,
    #[error("unknown vague predicate `{0}`")]
    UnknownPredicate(String),
    #[error("grounding `{predicate}` for action `{action}` failed: {source}")]
    Oracle {
        predicate: String,
        action: String,
        #[source]
        source: Box<OracleError>,
    },
}

/// Median of the samples; the mean of the central pair for even lengths.
pub fn aggregate(samples: &[Degree]) -> Result<Degree, GroundingError> {
    if samples.is_empty() {
        return Err(GroundingError::EmptySamples);
    }
    let mut sorted: Vec<f64> = samples.iter().map(|d| d.value()).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let m = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Ok(Degree::saturating(m))
}

/// Conjunction of an action's per-predicate degrees; `1` when it has none.
pub fn combine_predicates(kind: TNormKind, degrees: &[Degree]) -> Degree {
    plan_membership(kind, degrees.iter().copied())
}

/// Short stable digest of a state's canonical form.
pub fn state_digest(state: &State) -> String {
    let hash = Sha256::digest(state.canonical().as_bytes());
    hash[..8].iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn stable_u64(parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update(p.as_bytes());
        hasher.update([0x1f]);
    }
    let out = hasher.finalize();
    u64::from_le_bytes(out[..8].try_into().unwrap())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroundKey {
    pub predicate: String,
    pub state: String,
    pub action: String,
}

/// Sampling, aggregation and caching front-end over a [`MembershipOracle`].
pub struct Grounder {
    oracle: Arc<dyn MembershipOracle>,
    policy: AggregationPolicy,
    seed: u64,
    retries: u32,
    cache: RwLock<HashMap<GroundKey, Degree>>,
    audit: Option<Mutex<BTreeMap<GroundKey, Vec<f64>>>>,
    calibration: Option<CalibrationTable>,
    warned: Mutex<HashSet<String>>,
    oracle_calls: AtomicU64,
}

impl std::fmt::Debug for Grounder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grounder")
            .field("oracle", &self.oracle.kind())
            .field("policy", &self.policy)
            .field("seed", &self.seed)
            .finish()
    }
}

impl Grounder {
    pub fn new(oracle: Arc<dyn MembershipOracle>, policy: AggregationPolicy, seed: u64) -> Self {
        Grounder {
            oracle,
            policy,
            seed,
            retries: 0,
            cache: RwLock::new(HashMap::new()),
            audit: None,
            calibration: None,
            warned: Mutex::new(HashSet::new()),
            oracle_calls: AtomicU64::new(0),
        }
    }

    /// Retries for transient oracle failures before giving up.
    pub fn with_retries(mut self, retries: u32) -> Self {
        self.retries = retries;
        self
    }

    /// Records raw samples for every grounded query.
    pub fn with_audit(mut self) -> Self {
        self.audit = Some(Mutex::new(BTreeMap::new()));
        self
    }

    pub fn with_calibration(mut self, table: CalibrationTable) -> Self {
        self.calibration = Some(table);
        self
    }

    pub fn policy(&self) -> AggregationPolicy {
        self.policy
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn oracle(&self) -> &dyn MembershipOracle {
        self.oracle.as_ref()
    }

    pub fn oracle_calls(&self) -> u64 {
        self.oracle_calls.load(Ordering::Relaxed)
    }

    /// Fresh cache for a new planning episode, same oracle and settings.
    pub fn fresh(&self) -> Grounder {
        Grounder {
            oracle: Arc::clone(&self.oracle),
            policy: self.policy,
            seed: self.seed,
            retries: self.retries,
            cache: RwLock::new(HashMap::new()),
            audit: self.audit.as_ref().map(|_| Mutex::new(BTreeMap::new())),
            calibration: self.calibration.clone(),
            warned: Mutex::new(HashSet::new()),
            oracle_calls: AtomicU64::new(0),
        }
    }

    pub fn audit_samples(&self, key: &GroundKey) -> Option<Vec<f64>> {
        self.audit.as_ref().and_then(|a| a.lock().unwrap().get(key).cloned())
    }

    pub fn key(predicate: &VaguePredicate, state: &State, action: &Action) -> GroundKey {
        GroundKey {
            predicate: predicate.id.clone(),
            state: state_digest(state),
            action: action.id.clone(),
        }
    }

    fn sample_seed(&self, key: &GroundKey, index: usize) -> u64 {
        stable_u64(&[
            &self.seed.to_string(),
            &index.to_string(),
            &key.predicate,
            &key.action,
            &key.state,
        ])
    }

    fn warn_once(&self, tag: String, message: impl FnOnce() -> String) {
        if self.warned.lock().unwrap().insert(tag) {
            log::warn!("{}", message());
        }
    }

    /// Draws the raw (clamped) samples for one query without touching the cache.
    pub fn samples(
        &self,
        predicate: &VaguePredicate,
        state: &State,
        action: &Action,
    ) -> Result<Vec<Degree>, GroundingError> {
        if self.policy.k == 0 {
            return Err(GroundingError::ZeroWidth);
        }
        let key = Self::key(predicate, state, action);
        let query = Query {
            predicate,
            state,
            action,
        };
        let mut out = Vec::with_capacity(self.policy.k);
        for i in 0..self.policy.k {
            let seed = self.sample_seed(&key, i);
            let mut attempt = 0;
            let raw = loop {
                self.oracle_calls.fetch_add(1, Ordering::Relaxed);
                match self.oracle.sample(&query, seed) {
                    Ok(v) => break v,
                    Err(e) if e.is_transient() && attempt < self.retries => {
                        attempt += 1;
                        log::debug!("transient oracle failure ({e}), retry {attempt}");
                    }
                    Err(e) => {
                        return Err(GroundingError::Oracle {
                            predicate: predicate.id.clone(),
                            action: action.id.clone(),
                            source: Box::new(e),
                        })
                    }
                }
            };
            if !(0.0..=1.0).contains(&raw) {
                self.warn_once(format!("clamp:{}:{}", predicate.id, action.id), || {
                    format!(
                        "oracle returned {raw} for `{}` on `{}`; clamped to [0, 1]",
                        predicate.id, action.id
                    )
                });
            }
            out.push(Degree::saturating(raw));
        }
        Ok(out)
    }

    /// `μ` for one vague predicate of `action` in `state`.
    pub fn ground(&self, predicate: &VaguePredicate, state: &State, action: &Action) -> Result<Degree, GroundingError> {
        let key = Self::key(predicate, state, action);
        if let Some(d) = self.cache.read().unwrap().get(&key) {
            return Ok(*d);
        }
        let samples = self.samples(predicate, state, action)?;
        let mut degree = aggregate(&samples)?;
        if let Some(table) = &self.calibration {
            let ck = CalibrationKey::new(&predicate.id, action.calibration_class());
            if let Some(calibrated) = table.get(&ck) {
                degree = calibrated;
            }
        }
        if let Some(audit) = &self.audit {
            audit
                .lock()
                .unwrap()
                .insert(key.clone(), samples.iter().map(|d| d.value()).collect());
        }
        self.cache.write().unwrap().insert(key, degree);
        Ok(degree)
    }

    /// `μ(f; w)`: the t-norm conjunction of all of the action's vague predicates.
    pub fn action_degree(
        &self,
        domain: &Domain,
        kind: TNormKind,
        state: &State,
        action: &Action,
    ) -> Result<Degree, GroundingError> {
        let mut degrees = Vec::with_capacity(action.graded_predicates.len());
        for id in &action.graded_predicates {
            let predicate = domain
                .predicate(id)
                .ok_or_else(|| GroundingError::UnknownPredicate(id.clone()))?;
            degrees.push(self.ground(predicate, state, action)?);
        }
        Ok(combine_predicates(kind, &degrees))
    }

    /// Per-predicate raw samples for `action` in `state` (audit output).
    pub fn action_samples(&self, domain: &Domain, state: &State, action: &Action) -> BTreeMap<String, Vec<f64>> {
        let mut out = BTreeMap::new();
        for id in &action.graded_predicates {
            if let Some(p) = domain.predicate(id) {
                let key = Self::key(p, state, action);
                if let Some(samples) = self.audit_samples(&key) {
                    out.insert(id.clone(), samples);
                }
            }
        }
        out
    }
}

/// Builds the oracle declared in a domain file.
pub fn oracle_from_spec(spec: &OracleSpec, kind: &str, seed: u64) -> Result<Arc<dyn MembershipOracle>, String> {
    match kind {
        "table" => Ok(Arc::new(
            make_table_oracle(
                spec.table
                    .iter()
                    .map(|e| ((e.predicate.clone(), e.action.clone()), e.degree))
                    .collect(),
                spec.noise_std,
                seed,
                spec.default_degree,
                spec.strict,
            )
            .with_outliers(spec.outlier_rate),
        )),
        "rule" => Ok(Arc::new(make_rule_oracle(spec.rules.clone()))),
        other => Err(format!("oracle `{other}` cannot be built from the domain file")),
    }
}
