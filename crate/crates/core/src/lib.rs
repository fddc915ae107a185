//! Graded-applicability planning: crisp feasibility gating plus fuzzy plan membership.

pub mod acceptance;
pub mod bench;
pub mod chunking;
pub mod fuzzy;
pub mod grounding;
pub mod io;
pub mod pullback;
pub mod search;
pub mod world;

pub use acceptance::{AlphaPolicy, Criticality, Evaluator, FailureReason, PlanResult};
pub use fuzzy::{Degree, TNormKind};
pub use world::{Action, Atom, Domain, Goal, Problem, State};
