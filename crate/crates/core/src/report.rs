//! Verdict records shared by the theorem reports.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The measured constant does not meet the clause's hypothesis.
    NotApplicable,
    /// A limit the clause depends on has no plateau.
    NotConverged,
}

/// One clause of a theorem checked numerically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Clause {
    pub name: String,
    /// Hypothesis `measured_constant < claimed_threshold`.
    pub claimed_threshold: f64,
    pub measured_constant: f64,
    pub residual: Option<f64>,
    pub tolerance: Option<f64>,
    pub verdict: Verdict,
    pub note: Option<String>,
}

impl Clause {
    /// Verdict for a residual clause under the hypothesis `measured < threshold`.
    pub fn residual(name: &str, threshold: f64, measured: f64, residual: f64, tolerance: f64, converged: bool) -> Self {
        let verdict = if !(measured < threshold) {
            Verdict::NotApplicable
        } else if !converged {
            Verdict::NotConverged
        } else if residual <= tolerance {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Self {
            name: name.into(),
            claimed_threshold: threshold,
            measured_constant: measured,
            residual: Some(residual),
            tolerance: Some(tolerance),
            verdict,
            note: None,
        }
    }

    /// Existence clause: passes when the limit converged.
    pub fn existence(name: &str, threshold: f64, measured: f64, converged: bool, last_residual: f64) -> Self {
        let verdict = if !(measured < threshold) {
            Verdict::NotApplicable
        } else if converged {
            Verdict::Pass
        } else {
            Verdict::NotConverged
        };
        Self {
            name: name.into(),
            claimed_threshold: threshold,
            measured_constant: measured,
            residual: Some(last_residual),
            tolerance: None,
            verdict,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Exit-status severity: 0 all pass, 1 a verdict failed, 2 non-convergence only.
pub fn severity(verdicts: impl IntoIterator<Item = Verdict>) -> i32 {
    let mut code = 0;
    for v in verdicts {
        match v {
            Verdict::Fail => return 1,
            Verdict::NotConverged => code = 2,
            _ => {}
        }
    }
    code
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clause_verdicts() {
        assert_eq!(Clause::residual("x", 2.0, 0.5, 1e-6, 1e-5, true).verdict, Verdict::Pass);
        assert_eq!(Clause::residual("x", 2.0, 0.5, 1e-4, 1e-5, true).verdict, Verdict::Fail);
        assert_eq!(Clause::residual("x", 2.0, 0.5, 1e-6, 1e-5, false).verdict, Verdict::NotConverged);
        assert_eq!(Clause::residual("x", 2.0, 2.5, 1e-6, 1e-5, true).verdict, Verdict::NotApplicable);
        assert_eq!(Clause::residual("x", 2.0, f64::INFINITY, 0.0, 1e-5, true).verdict, Verdict::NotApplicable);
        assert_eq!(Clause::existence("x", 2.0, 0.1, false, 1.0).verdict, Verdict::NotConverged);
    }

    #[test]
    fn severity_order() {
        assert_eq!(severity([Verdict::Pass, Verdict::NotApplicable]), 0);
        assert_eq!(severity([Verdict::Pass, Verdict::NotConverged]), 2);
        assert_eq!(severity([Verdict::NotConverged, Verdict::Fail]), 1);
    }
}
