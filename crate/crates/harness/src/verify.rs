use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use relspec_core::io::{read_matrix, write_matrix_market};
use serde::{Deserialize, Serialize};

use crate::ensemble::{trial_rng, EnsembleSpec, Instance, InstanceMeta};
use crate::error::Result;
use crate::report::{TrialOutcome, VerificationReport};
use crate::suites::{Suite, DEFAULT_TOLERANCE};

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Relative slack for containment checks.
    pub tolerance: f64,
    pub timestamp: bool,
    /// Failing trials are dumped under this directory.
    pub artifacts: Option<PathBuf>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            timestamp: true,
            artifacts: None,
        }
    }
}

/// What `replay` needs besides the dumped matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub suite: Suite,
    pub spec: EnsembleSpec,
    pub trial: u64,
    pub tolerance: f64,
    pub meta: InstanceMeta,
}

fn run_trial(suite: Suite, spec: &EnsembleSpec, trial: u64, tol: f64) -> Result<(TrialOutcome, Instance)> {
    let mut rng = trial_rng(spec.seed, trial);
    let inst = spec.draw(&mut rng)?;
    let checks = suite.run(&inst, &mut rng, tol);
    Ok((TrialOutcome::new(trial, checks), inst))
}

pub fn verify(suite: Suite, spec: &EnsembleSpec, opts: &VerifyOptions) -> Result<VerificationReport> {
    spec.validate()?;
    suite.check_compatible(&spec.generator)?;
    let start = Instant::now();
    let results: Vec<Result<(TrialOutcome, Instance)>> = (0..spec.count as u64)
        .into_par_iter()
        .map(|t| run_trial(suite, spec, t, opts.tolerance))
        .collect();
    let mut trials = Vec::with_capacity(results.len());
    for r in results {
        let (outcome, inst) = r?;
        if !outcome.passed {
            if let Some(dir) = &opts.artifacts {
                dump_failure(dir, suite, spec, &outcome, &inst, opts.tolerance)?;
            }
        }
        trials.push(outcome);
    }
    let mut report = VerificationReport::assemble(suite, spec.clone(), opts.tolerance, trials);
    if opts.timestamp {
        report.runtime_seconds = Some(start.elapsed().as_secs_f64());
        report.timestamp = SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs());
    }
    Ok(report)
}

pub fn artifact_dir(root: &Path, suite: Suite, seed: u64, trial: u64) -> PathBuf {
    root.join(format!("{}-{seed}-{trial}", suite.name()))
}

fn dump_failure(
    root: &Path,
    suite: Suite,
    spec: &EnsembleSpec,
    outcome: &TrialOutcome,
    inst: &Instance,
    tolerance: f64,
) -> Result<()> {
    let dir = artifact_dir(root, suite, spec.seed, outcome.trial);
    fs::create_dir_all(&dir)?;
    write_matrix_market(dir.join("h.mtx"), inst.h.matrix())?;
    write_matrix_market(dir.join("a.mtx"), inst.a.matrix())?;
    let record = ReplayRecord {
        suite,
        spec: spec.clone(),
        trial: outcome.trial,
        tolerance,
        meta: inst.meta.clone(),
    };
    fs::write(dir.join("instance.json"), serde_json::to_string_pretty(&record)?)?;
    fs::write(dir.join("outcome.json"), serde_json::to_string_pretty(outcome)?)?;
    Ok(())
}

/// Reruns a dumped trial on the matrices stored in `dir`.
pub fn replay(dir: &Path) -> Result<TrialOutcome> {
    let record: ReplayRecord = serde_json::from_str(&fs::read_to_string(dir.join("instance.json"))?)?;
    let h = read_matrix(dir.join("h.mtx"))?.operator;
    let a = read_matrix(dir.join("a.mtx"))?.operator;
    // regenerate the stream up to where the suite's auxiliary draws begin
    let mut rng = trial_rng(record.spec.seed, record.trial);
    record.spec.draw(&mut rng)?;
    let inst = Instance { h, a, meta: record.meta };
    Ok(TrialOutcome::new(record.trial, record.suite.run(&inst, &mut rng, record.tolerance)))
}
