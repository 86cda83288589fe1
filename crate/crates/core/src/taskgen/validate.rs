//! Task acceptance: corruptions must break enough previously passing tests.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{apply_corruptions, Corruption, TaskgenError};
use crate::harness::{failing_diff, run_suite_with, HarnessError, RunnerConfig, Sandbox, SuiteExit, SuiteReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub min_failing: usize,
    pub runner: RunnerConfig,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            min_failing: 5,
            runner: RunnerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    TooFewFailures,
    Timeout,
    Crashed,
    ApplyFailed,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::TooFewFailures => "too_few_failures",
            RejectReason::Timeout => "timeout",
            RejectReason::Crashed => "crashed",
            RejectReason::ApplyFailed => "apply_failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub accepted: bool,
    pub failing_tests: BTreeSet<String>,
    pub reason: Option<RejectReason>,
    pub detail: Option<String>,
}

impl Validation {
    fn rejected(reason: RejectReason, failing_tests: BTreeSet<String>, detail: Option<String>) -> Self {
        Self {
            accepted: false,
            failing_tests,
            reason: Some(reason),
            detail,
        }
    }
}

/// Result of running the suite on a corrupted copy.
#[derive(Debug, Clone)]
pub enum CorruptedRun {
    Report(SuiteReport),
    ApplyFailed(String),
    Crashed(String),
}

/// Applies `corruptions` to a fresh copy of `root` and runs the suite.
pub fn run_corrupted(root: &Path, corruptions: &[Corruption], runner: &RunnerConfig) -> Result<CorruptedRun, TaskgenError> {
    let sandbox = Sandbox::create(root).map_err(|source| TaskgenError::Io {
        path: root.to_path_buf(),
        source,
    })?;
    if let Err(e) = apply_corruptions(sandbox.path(), corruptions) {
        return Ok(CorruptedRun::ApplyFailed(e.to_string()));
    }
    match run_suite_with(sandbox.path(), runner) {
        Ok(report) => Ok(CorruptedRun::Report(report)),
        Err(e @ HarnessError::RunnerCrash { .. }) => Ok(CorruptedRun::Crashed(e.to_string())),
        Err(e) => Err(e.into()),
    }
}

/// Accepts iff the suite completes and at least `min_failing` tests that
/// passed in `baseline` now fail.
pub fn validate_task(
    root: &Path,
    baseline: &SuiteReport,
    corruptions: &[Corruption],
    config: &ValidationConfig,
) -> Result<Validation, TaskgenError> {
    let report = match run_corrupted(root, corruptions, &config.runner)? {
        CorruptedRun::Report(report) => report,
        CorruptedRun::Crashed(detail) => {
            return Ok(Validation::rejected(RejectReason::Crashed, BTreeSet::new(), Some(detail)))
        }
        CorruptedRun::ApplyFailed(detail) => {
            return Ok(Validation::rejected(RejectReason::ApplyFailed, BTreeSet::new(), Some(detail)))
        }
    };
    let failing = failing_diff(baseline, &report);
    match report.exit {
        SuiteExit::Timeout => return Ok(Validation::rejected(RejectReason::Timeout, failing, None)),
        SuiteExit::Crashed => return Ok(Validation::rejected(RejectReason::Crashed, failing, None)),
        SuiteExit::Completed => {}
    }
    if failing.len() < config.min_failing {
        return Ok(Validation::rejected(RejectReason::TooFewFailures, failing, None));
    }
    Ok(Validation {
        accepted: true,
        failing_tests: failing,
        reason: None,
        detail: None,
    })
}
