//! Bounded correction of elicited degrees toward observed execution success.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::fuzzy::Degree;

pub const DEFAULT_ETA: f64 = 0.3;
pub const DEFAULT_MAX_STEP: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CalibrationKey {
    pub predicate: String,
    /// Action id or action class.
    pub action: String,
}

impl CalibrationKey {
    pub fn new(predicate: &str, action: &str) -> Self {
        CalibrationKey {
            predicate: predicate.to_string(),
            action: action.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub degree: Degree,
    pub observations: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub eta: f64,
    pub max_step: f64,
    #[serde(with = "entries_as_list")]
    pub entries: BTreeMap<CalibrationKey, CalibrationEntry>,
}

impl Default for CalibrationTable {
    fn default() -> Self {
        CalibrationTable {
            eta: DEFAULT_ETA,
            max_step: DEFAULT_MAX_STEP,
            entries: BTreeMap::new(),
        }
    }
}

/// `clamp01(elicited + clamp(η·(observed − elicited), −Δ, +Δ))`.
pub fn calibrate_value(elicited: Degree, observed: Degree, eta: f64, max_step: f64) -> Degree {
    let step = (eta * (observed.value() - elicited.value())).clamp(-max_step, max_step);
    Degree::saturating(elicited.value() + step)
}

impl CalibrationTable {
    pub fn get(&self, key: &CalibrationKey) -> Option<Degree> {
        self.entries.get(key).map(|e| e.degree)
    }

    /// Applies one bounded update and stores the result.
    pub fn calibrate(&mut self, key: CalibrationKey, elicited: Degree, observed: Degree) -> Degree {
        let updated = calibrate_value(elicited, observed, self.eta, self.max_step);
        let entry = self.entries.entry(key).or_insert(CalibrationEntry {
            degree: updated,
            observations: 0,
        });
        entry.degree = updated;
        entry.observations += 1;
        updated
    }
}

mod entries_as_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Row {
        predicate: String,
        action: String,
        degree: Degree,
        observations: u32,
    }

    pub fn serialize<S: Serializer>(map: &BTreeMap<CalibrationKey, CalibrationEntry>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Row> = map
            .iter()
            .map(|(k, v)| Row {
                predicate: k.predicate.clone(),
                action: k.action.clone(),
                degree: v.degree,
                observations: v.observations,
            })
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<CalibrationKey, CalibrationEntry>, D::Error> {
        let rows = Vec::<Row>::deserialize(d)?;
        Ok(rows
            .into_iter()
            .map(|r| {
                (
                    CalibrationKey {
                        predicate: r.predicate,
                        action: r.action,
                    },
                    CalibrationEntry {
                        degree: r.degree,
                        observations: r.observations,
                    },
                )
            })
            .collect())
    }
}
