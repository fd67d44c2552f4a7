//! Checkers for the sufficient dominance conditions.
//!
//! A verdict of `holds = true` means the sufficient condition is satisfied on the
//! checked horizon and in the x → ∞ limit. `holds = false` never asserts that
//! dominance fails.

mod affine;
mod multin;
mod thm1;

pub use affine::{check_assumption1, check_assumption2, AffineConstants};
pub use multin::{check_cor_multin, check_thm_multin, multin_constants};
pub use thm1::{check_thm1, Thm1Variant};

use serde::{Deserialize, Serialize};

use crate::scalar::Field;

/// Maximum number of violating x values kept in a verdict.
pub const MAX_WITNESSES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailVerdict {
    HoldsInLimit,
    FailsInLimit,
    Inconclusive,
}

impl TailVerdict {
    /// Verdict for a limit value that must satisfy `value ≤ 0`.
    pub fn nonpositive<T: Field>(value: &T) -> Self {
        let tol = T::boundary_tol();
        if *value < -tol.clone() {
            Self::HoldsInLimit
        } else if *value > tol {
            Self::FailsInLimit
        } else {
            Self::Inconclusive
        }
    }

    /// Verdict for a limit value that must satisfy `value ≥ 0`.
    pub fn nonnegative<T: Field>(value: &T) -> Self {
        Self::nonpositive(&-value.clone())
    }

    /// Either alternative suffices.
    pub fn or(self, other: Self) -> Self {
        use TailVerdict::*;
        match (self, other) {
            (HoldsInLimit, _) | (_, HoldsInLimit) => HoldsInLimit,
            (FailsInLimit, FailsInLimit) => FailsInLimit,
            _ => Inconclusive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominanceVerdict {
    pub holds: bool,
    pub checked_horizon: u64,
    pub tail_verdict: TailVerdict,
    /// Values of x at which the per-x condition fails (at most [`MAX_WITNESSES`]).
    pub witnesses: Vec<u64>,
    /// Human-readable reasons for every failed requirement.
    pub failures: Vec<String>,
}

impl DominanceVerdict {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serializes")
    }
}

#[derive(Debug, Default)]
pub(crate) struct VerdictBuilder {
    failures: Vec<String>,
    witnesses: Vec<u64>,
    violations: u64,
}

impl VerdictBuilder {
    pub(crate) fn fail(&mut self, reason: impl Into<String>) {
        self.failures.push(reason.into());
    }

    pub(crate) fn witness(&mut self, x: u64) {
        self.violations += 1;
        if self.witnesses.len() < MAX_WITNESSES {
            self.witnesses.push(x);
        }
    }

    pub(crate) fn finish(mut self, checked_horizon: u64, tail: TailVerdict) -> DominanceVerdict {
        if self.violations > 0 {
            self.failures.push(format!(
                "per-x condition fails at {} of {} checked values of x",
                self.violations, checked_horizon
            ));
        }
        match tail {
            TailVerdict::FailsInLimit => self.failures.push("condition fails as x → ∞".into()),
            TailVerdict::Inconclusive => self.failures.push("limit x → ∞ sits on an equality boundary".into()),
            TailVerdict::HoldsInLimit => {}
        }
        DominanceVerdict {
            holds: self.failures.is_empty(),
            checked_horizon,
            tail_verdict: tail,
            witnesses: self.witnesses,
            failures: self.failures,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_classification() {
        assert_eq!(TailVerdict::nonpositive(&-1.0), TailVerdict::HoldsInLimit);
        assert_eq!(TailVerdict::nonpositive(&1e-13), TailVerdict::Inconclusive);
        assert_eq!(TailVerdict::nonnegative(&-1.0), TailVerdict::FailsInLimit);
        assert_eq!(
            TailVerdict::FailsInLimit.or(TailVerdict::Inconclusive),
            TailVerdict::Inconclusive
        );
    }

    #[test]
    fn verdict_json_fields() {
        let v = VerdictBuilder::default().finish(10, TailVerdict::HoldsInLimit);
        let json = v.to_json();
        assert!(json.contains("\"tail_verdict\": \"holds-in-limit\""));
        assert!(v.holds);
    }
}
