use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ensemble::EnsembleSpec;
use crate::suites::Suite;

/// One verified statement. `margin` is the distance to the bound, positive
/// when the statement holds; absent when it has no numeric slack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl TrialOutcome {
    pub fn new(trial: u64, checks: Vec<Check>) -> Self {
        Self {
            trial,
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub suite: Suite,
    pub spec: EnsembleSpec,
    pub tolerance: f64,
    pub trials: Vec<TrialOutcome>,
    pub passed: usize,
    pub failed: usize,
    /// Smallest margin per check name over all trials.
    pub worst_margins: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
    /// Seconds since the Unix epoch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

impl VerificationReport {
    pub fn assemble(suite: Suite, spec: EnsembleSpec, tolerance: f64, trials: Vec<TrialOutcome>) -> Self {
        let passed = trials.iter().filter(|t| t.passed).count();
        let mut worst_margins = BTreeMap::new();
        for check in trials.iter().flat_map(|t| &t.checks) {
            if let Some(m) = check.margin.filter(|m| m.is_finite()) {
                worst_margins
                    .entry(check.name.clone())
                    .and_modify(|w: &mut f64| *w = w.min(m))
                    .or_insert(m);
            }
        }
        Self {
            suite,
            spec,
            tolerance,
            failed: trials.len() - passed,
            passed,
            trials,
            worst_margins,
            runtime_seconds: None,
            timestamp: None,
        }
    }

    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }

    /// `trial,passed,check,passed,margin` rows, one per check.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,trial_passed,check,check_passed,margin\n");
        for t in &self.trials {
            for c in &t.checks {
                let margin = c.margin.map(|m| m.to_string()).unwrap_or_default();
                out.push_str(&format!("{},{},{},{},{}\n", t.trial, t.passed, c.name, c.passed, margin));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::Generator;

    fn check(name: &str, passed: bool, margin: Option<f64>) -> Check {
        Check {
            name: name.into(),
            passed,
            margin,
            detail: None,
        }
    }

    fn spec() -> EnsembleSpec {
        EnsembleSpec {
            n: 4,
            count: 2,
            seed: 0,
            generator: Generator::DenseGueLike,
        }
    }

    #[test]
    fn worst_margins_skip_non_finite() {
        let trials = vec![
            TrialOutcome::new(0, vec![check("x", true, Some(0.5)), check("y", true, Some(f64::INFINITY))]),
            TrialOutcome::new(1, vec![check("x", false, Some(-0.25)), check("y", true, None)]),
        ];
        let r = VerificationReport::assemble(Suite::Appendix, spec(), 1e-10, trials);
        assert_eq!((r.passed, r.failed), (1, 1));
        assert!(!r.all_passed());
        assert_eq!(r.worst_margins.get("x"), Some(&-0.25));
        assert_eq!(r.worst_margins.get("y"), None);
        assert_eq!(r.trials[1].failed_checks().count(), 1);
    }

    #[test]
    fn csv_has_one_row_per_check() {
        let trials = vec![TrialOutcome::new(0, vec![check("x", true, Some(1.5)), check("y", true, None)])];
        let r = VerificationReport::assemble(Suite::Appendix, spec(), 1e-10, trials);
        assert_eq!(r.to_csv(), "trial,trial_passed,check,check_passed,margin\n0,true,x,true,1.5\n0,true,y,true,\n");
    }
}
