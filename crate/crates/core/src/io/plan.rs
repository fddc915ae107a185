use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acceptance::{AlphaPolicy, Evaluator, PlanResult};
use crate::chunking::DEFAULT_MAX_CHUNK;
use crate::fuzzy::TNormKind;
use crate::search::SearchConfig;
use crate::world::apply;

use super::{from_json, LoadError};

/// Raw oracle samples behind one grounded degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    /// Composition step, starting at 1.
    pub step: usize,
    pub action: String,
    pub predicate: String,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_digest: String,
    pub oracle: String,
    pub seed: u64,
    pub tnorm: TNormKind,
    pub k: usize,
    #[serde(default = "default_chunk")]
    pub max_chunk: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub samples: Vec<SampleRecord>,
}

fn default_chunk() -> usize {
    DEFAULT_MAX_CHUNK
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    #[serde(flatten)]
    pub result: PlanResult,
    pub provenance: Provenance,
}

pub fn serialize_plan(plan: &PlanFile) -> String {
    serde_json::to_string_pretty(plan).expect("plan serializes")
}

pub fn parse_plan(text: &str) -> Result<PlanFile, LoadError> {
    from_json(text)
}

/// Short digest of everything that influences a planning run.
pub fn config_digest(config: &SearchConfig, oracle: &str, k: usize, alpha: &AlphaPolicy) -> String {
    let blob = serde_json::json!({
        "search": config,
        "oracle": oracle,
        "k": k,
        "alpha": alpha,
    });
    let hash = Sha256::digest(blob.to_string().as_bytes());
    hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Audit samples recorded by the grounder for each step of `result`.
///
/// Replays the plan; stops quietly at the first inapplicable step.
pub fn plan_samples(ev: &Evaluator<'_>, result: &PlanResult) -> Vec<SampleRecord> {
    let mut out = Vec::new();
    let mut state = ev.problem.initial.clone();
    for (i, (macro_id, members)) in result.steps().into_iter().enumerate() {
        let queried = match macro_id.and_then(|id| ev.find_macro(id)) {
            Some(m) => Some(&m.composite),
            None if members.len() == 1 => ev.domain.action(&members[0]),
            None => None,
        };
        if let Some(action) = queried {
            for (predicate, samples) in ev.grounder.action_samples(ev.domain, &state, action) {
                out.push(SampleRecord {
                    step: i + 1,
                    action: action.id.clone(),
                    predicate,
                    samples,
                });
            }
        }
        for id in members {
            let Some(next) = ev.domain.action(id).and_then(|a| apply(&state, a).ok()) else {
                return out;
            };
            state = next;
        }
    }
    out
}
