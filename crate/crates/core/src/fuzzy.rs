//! Degrees in `[0, 1]`, t-norms, their residua, and plan-level composition.
//!
//! Three t-norms are supported:
//!
//! - **Łukasiewicz** (default): `a ⊗ b = max(0, a + b − 1)`, residuum `min(1, 1 − a + b)`.
//!   Nilpotent: repeated composition of sub-unit degrees reaches exactly zero.
//! - **Gödel**: `a ⊗ b = min(a, b)`, residuum `1` if `a ≤ b` else `b`.
//! - **Product**: `a ⊗ b = a · b`, residuum `1` if `a ≤ b` else `b / a`.
//!
//! Plan membership is the left fold of the t-norm over per-step degrees starting at `1`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DegreeError {
    #[error("degree {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("degree is not a finite number")]
    NotFinite,
}

/// A graded truth value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Degree(f64);

impl Degree {
    pub const ZERO: Degree = Degree(0.0);
    pub const ONE: Degree = Degree(1.0);

    pub fn new(value: f64) -> Result<Self, DegreeError> {
        if !value.is_finite() {
            return Err(DegreeError::NotFinite);
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(DegreeError::OutOfRange(value));
        }
        Ok(Degree(value))
    }

    /// Clamps into `[0, 1]`; NaN maps to `0`.
    pub fn saturating(value: f64) -> Self {
        if value.is_nan() {
            Degree(0.0)
        } else {
            Degree(value.clamp(0.0, 1.0))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0.0
    }

    pub fn is_one(self) -> bool {
        self.0 == 1.0
    }
}

impl<'de> Deserialize<'de> for Degree {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = f64::deserialize(deserializer)?;
        Degree::new(raw).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl TryFrom<f64> for Degree {
    type Error = DegreeError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Degree::new(value)
    }
}

impl From<Degree> for f64 {
    fn from(d: Degree) -> f64 {
        d.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TNormKind {
    #[default]
    Lukasiewicz,
    Godel,
    Product,
}

impl TNormKind {
    pub const ALL: [TNormKind; 3] = [TNormKind::Lukasiewicz, TNormKind::Godel, TNormKind::Product];

    pub fn name(self) -> &'static str {
        match self {
            TNormKind::Lukasiewicz => "lukasiewicz",
            TNormKind::Godel => "godel",
            TNormKind::Product => "product",
        }
    }

    pub fn tnorm(self, a: Degree, b: Degree) -> Degree {
        tnorm(self, a, b)
    }

    pub fn residuum(self, a: Degree, b: Degree) -> Degree {
        residuum(self, a, b)
    }
}

impl fmt::Display for TNormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TNormKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lukasiewicz" | "łukasiewicz" | "luk" => Ok(TNormKind::Lukasiewicz),
            "godel" | "gödel" | "min" => Ok(TNormKind::Godel),
            "product" | "prod" => Ok(TNormKind::Product),
            other => Err(format!(
                "unknown t-norm `{other}` (expected lukasiewicz, godel or product)"
            )),
        }
    }
}

/// Conjunction of two degrees.
///
/// The identity element is handled explicitly so that `1 ⊗ x` returns `x`
/// bit-for-bit under every variant.
pub fn tnorm(kind: TNormKind, a: Degree, b: Degree) -> Degree {
    if a.is_one() {
        return b;
    }
    if b.is_one() {
        return a;
    }
    let v = match kind {
        TNormKind::Lukasiewicz => (a.0 + b.0 - 1.0).max(0.0),
        TNormKind::Godel => a.0.min(b.0),
        TNormKind::Product => a.0 * b.0,
    };
    Degree::saturating(v)
}

/// The residuated implication `a ⇒ b` adjoint to [`tnorm`].
pub fn residuum(kind: TNormKind, a: Degree, b: Degree) -> Degree {
    if a.0 <= b.0 {
        return Degree::ONE;
    }
    let v = match kind {
        TNormKind::Lukasiewicz => 1.0 - a.0 + b.0,
        TNormKind::Godel => b.0,
        TNormKind::Product => b.0 / a.0,
    };
    Degree::saturating(v)
}

/// Left fold of the t-norm over `degrees`, starting from `1`.
pub fn plan_membership<I>(kind: TNormKind, degrees: I) -> Degree
where
    I: IntoIterator<Item = Degree>,
{
    degrees.into_iter().fold(Degree::ONE, |acc, d| tnorm(kind, acc, d))
}

/// `max(0, Σ μ_i − (n − 1))`, the closed form of the iterated Łukasiewicz t-norm.
pub fn lukasiewicz_closed_form(degrees: &[Degree]) -> Degree {
    if degrees.is_empty() {
        return Degree::ONE;
    }
    let sum: f64 = degrees.iter().map(|d| d.0).sum();
    Degree::saturating(sum - (degrees.len() as f64 - 1.0))
}

/// Smallest `n` such that `n` copies of `a` compose to zero under Łukasiewicz.
/// `None` when `a == 1`.
pub fn nilpotency_index(a: Degree) -> Option<usize> {
    if a.is_one() {
        return None;
    }
    Some((1.0 / (1.0 - a.0)).ceil() as usize)
}
