//! File formats: domain, problem and plan JSON, plus the preference-subset importer.

mod files;
mod plan;
pub mod preference;
mod sexpr;

use std::fmt;

use serde::de::DeserializeOwned;
use thiserror::Error;

pub use files::{parse_domain, parse_problem, parse_state, write_domain, write_problem};
pub use plan::{config_digest, parse_plan, plan_samples, serialize_plan, PlanFile, Provenance, SampleRecord};
pub use preference::{
    import_preference_subset, import_with_task, GroundTask, ImportError, LiftedAction, LiftedAtom, Preference,
};

/// One semantic problem in a loaded document, located by a JSON path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl Issue {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Issue {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoadError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path} (line {line}): {message}")]
    Shape { path: String, line: usize, message: String },
    #[error("{}", join_issues(.0))]
    Invalid(Vec<Issue>),
}

impl LoadError {
    pub fn issues(&self) -> &[Issue] {
        match self {
            LoadError::Invalid(issues) => issues,
            _ => &[],
        }
    }
}

fn join_issues(issues: &[Issue]) -> String {
    issues.iter().map(Issue::to_string).collect::<Vec<_>>().join("; ")
}

/// Deserializes JSON, reporting syntax errors by position and shape errors by path.
pub(crate) fn from_json<T: DeserializeOwned>(text: &str) -> Result<T, LoadError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        match inner.classify() {
            serde_json::error::Category::Data => LoadError::Shape {
                path,
                line: inner.line(),
                message: strip_position(&inner.to_string()),
            },
            _ => LoadError::Syntax {
                line: inner.line(),
                column: inner.column(),
                message: strip_position(&inner.to_string()),
            },
        }
    })?;
    de.end().map_err(|e| LoadError::Syntax {
        line: e.line(),
        column: e.column(),
        message: strip_position(&e.to_string()),
    })?;
    Ok(value)
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}
