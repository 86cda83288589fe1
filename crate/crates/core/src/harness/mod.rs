//! Test-suite execution in sandboxed copies, with a wall-clock cap.

pub mod junit;
pub mod sandbox;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::os::unix::process::CommandExt;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use junit::parse_junit;
pub use sandbox::{copy_tree, Sandbox};

use crate::repo::Repository;

/// Default runner: pytest writing a JUnit report to the `{report}` slot.
pub const DEFAULT_TEST_COMMAND: &str =
    "python3 -m pytest -q -p no:cacheprovider --continue-on-collection-errors --junitxml={report}";

pub const DEFAULT_CAP_SECONDS: f64 = 60.0;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("test runner crashed (exit code {code:?}): {stderr}")]
    RunnerCrash { code: Option<i32>, stderr: String },
    #[error("baseline failed ({reason}): {failing:?}")]
    BaselineFailed { reason: String, failing: Vec<String> },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestStatus {
    Pass,
    Fail,
    Error,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub test_id: String,
    pub status: TestStatus,
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteExit {
    Completed,
    Timeout,
    Crashed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub outcomes: Vec<TestOutcome>,
    pub wall_clock: f64,
    pub exit: SuiteExit,
}

impl SuiteReport {
    pub fn ids_with(&self, pred: impl Fn(TestStatus) -> bool) -> BTreeSet<String> {
        self.outcomes
            .iter()
            .filter(|o| pred(o.status))
            .map(|o| o.test_id.clone())
            .collect()
    }

    pub fn passing(&self) -> BTreeSet<String> {
        self.ids_with(|s| s == TestStatus::Pass)
    }

    /// Failed or errored tests (errors count as failures).
    pub fn failing(&self) -> BTreeSet<String> {
        self.ids_with(|s| matches!(s, TestStatus::Fail | TestStatus::Error))
    }

    /// Outcomes with durations zeroed, for run-to-run comparison.
    pub fn status_map(&self) -> BTreeMap<String, TestStatus> {
        self.outcomes.iter().map(|o| (o.test_id.clone(), o.status)).collect()
    }
}

/// How to run a suite: a command template and limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunnerConfig {
    /// Shell command; `{report}` is replaced by the JUnit report path.
    pub test_command: String,
    pub cap_seconds: f64,
    /// Extra environment variables for the child.
    #[serde(default)]
    pub env: BTreeMap<String, String>,
}

impl RunnerConfig {
    pub fn new(test_command: &str, cap_seconds: f64) -> Self {
        Self {
            test_command: test_command.to_string(),
            cap_seconds,
            env: BTreeMap::new(),
        }
    }
}

impl Default for RunnerConfig {
    fn default() -> Self {
        Self::new(DEFAULT_TEST_COMMAND, DEFAULT_CAP_SECONDS)
    }
}

fn kill_group(pid: u32) {
    // SAFETY: signalling a process group we created; failure is harmless.
    unsafe {
        libc::kill(-(pid as i32), libc::SIGKILL);
    }
}

fn tail(path: &Path, max: usize) -> String {
    let text = std::fs::read_to_string(path).unwrap_or_default();
    let start = text.len().saturating_sub(max);
    let start = (start..=text.len()).find(|&i| text.is_char_boundary(i)).unwrap_or(text.len());
    text[start..].trim().to_string()
}

pub fn run_suite(snapshot: &Path, test_command: &str, cap_seconds: f64) -> Result<SuiteReport, HarnessError> {
    run_suite_with(snapshot, &RunnerConfig::new(test_command, cap_seconds))
}

/// Runs the suite in `snapshot` (which must be a copy, never the original
/// tree). The child runs in its own process group, so the whole tree is
/// killed when the cap elapses.
pub fn run_suite_with(snapshot: &Path, config: &RunnerConfig) -> Result<SuiteReport, HarnessError> {
    let scratch = tempfile::Builder::new().prefix("faultline-run-").tempdir()?;
    let report = scratch.path().join("report.xml");
    let stdout_path = scratch.path().join("stdout.txt");
    let stderr_path = scratch.path().join("stderr.txt");
    let command = config
        .test_command
        .replace("{report}", &report.display().to_string());

    let start = Instant::now();
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(&command)
        .current_dir(snapshot)
        .env("PYTHONDONTWRITEBYTECODE", "1")
        .envs(&config.env)
        .stdin(Stdio::null())
        .stdout(Stdio::from(File::create(&stdout_path)?))
        .stderr(Stdio::from(File::create(&stderr_path)?))
        .process_group(0)
        .spawn()?;
    let cap = Duration::from_secs_f64(config.cap_seconds.max(0.0));
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break Some(status);
        }
        if start.elapsed() >= cap {
            kill_group(child.id());
            let _ = child.wait();
            break None;
        }
        std::thread::sleep(Duration::from_millis(10));
    };
    // Reap stragglers that outlived the shell.
    kill_group(child.id());
    let wall_clock = start.elapsed().as_secs_f64();

    let parsed = std::fs::read_to_string(&report)
        .ok()
        .and_then(|xml| parse_junit(&xml).ok());
    let Some(status) = status else {
        log::warn!("suite in {} hit the {:.1}s cap", snapshot.display(), config.cap_seconds);
        return Ok(SuiteReport {
            outcomes: parsed.unwrap_or_default(),
            wall_clock,
            exit: SuiteExit::Timeout,
        });
    };
    match parsed {
        Some(outcomes) => Ok(SuiteReport {
            outcomes,
            wall_clock,
            exit: SuiteExit::Completed,
        }),
        None if status.success() => Ok(SuiteReport {
            outcomes: Vec::new(),
            wall_clock,
            exit: SuiteExit::Completed,
        }),
        None => Err(HarnessError::RunnerCrash {
            code: status.code(),
            stderr: format!("{}\n{}", tail(&stdout_path, 2000), tail(&stderr_path, 2000))
                .trim()
                .to_string(),
        }),
    }
}

/// Runs the suite on a pristine copy of the repository and requires every
/// non-skipped test to pass.
pub fn baseline(repo: &Repository, cap_seconds: f64) -> Result<SuiteReport, HarnessError> {
    baseline_with(repo.root.as_path(), &RunnerConfig::new(&repo.test_command, cap_seconds))
}

pub fn baseline_with(root: &Path, config: &RunnerConfig) -> Result<SuiteReport, HarnessError> {
    let sandbox = Sandbox::create(root)?;
    let report = run_suite_with(sandbox.path(), config)?;
    check_baseline(&report)?;
    Ok(report)
}

pub fn check_baseline(report: &SuiteReport) -> Result<(), HarnessError> {
    match report.exit {
        SuiteExit::Completed => {}
        SuiteExit::Timeout => {
            return Err(HarnessError::BaselineFailed {
                reason: "timeout".into(),
                failing: Vec::new(),
            })
        }
        SuiteExit::Crashed => {
            return Err(HarnessError::BaselineFailed {
                reason: "crashed".into(),
                failing: Vec::new(),
            })
        }
    }
    let failing: Vec<String> = report.failing().into_iter().collect();
    if !failing.is_empty() {
        return Err(HarnessError::BaselineFailed {
            reason: "failing_tests".into(),
            failing,
        });
    }
    if report.passing().is_empty() {
        return Err(HarnessError::BaselineFailed {
            reason: "no_passing_tests".into(),
            failing: Vec::new(),
        });
    }
    Ok(())
}

/// Tests passing in `baseline` that fail, error, or are missing in `after`.
pub fn failing_diff(baseline: &SuiteReport, after: &SuiteReport) -> BTreeSet<String> {
    let after = after.status_map();
    baseline
        .passing()
        .into_iter()
        .filter(|id| !matches!(after.get(id), Some(TestStatus::Pass) | Some(TestStatus::Skipped)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(entries: &[(&str, TestStatus)]) -> SuiteReport {
        SuiteReport {
            outcomes: entries
                .iter()
                .map(|(id, s)| TestOutcome {
                    test_id: id.to_string(),
                    status: *s,
                    duration: 0.0,
                })
                .collect(),
            wall_clock: 0.0,
            exit: SuiteExit::Completed,
        }
    }

    #[test]
    fn diff_counts_failures_and_vanished_tests() {
        use TestStatus::*;
        let base = report(&[("a", Pass), ("b", Pass), ("c", Pass), ("s", Skipped)]);
        assert!(failing_diff(&base, &base).is_empty());
        let after = report(&[("a", Pass), ("b", Error), ("s", Fail)]);
        let diff: Vec<_> = failing_diff(&base, &after).into_iter().collect();
        assert_eq!(diff, ["b", "c"]);
    }

    #[test]
    fn timeout_is_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let t = Instant::now();
        let r = run_suite(dir.path(), "sleep 30", 1.0).unwrap();
        assert_eq!(r.exit, SuiteExit::Timeout);
        assert!(r.wall_clock >= 0.5);
        assert!(t.elapsed() < Duration::from_millis(2500));
    }

    #[test]
    fn crash_without_report() {
        let dir = tempfile::tempdir().unwrap();
        let err = run_suite(dir.path(), "echo boom >&2; exit 3", 5.0).unwrap_err();
        assert!(matches!(err, HarnessError::RunnerCrash { code: Some(3), ref stderr } if stderr.contains("boom")));
    }

    #[test]
    fn baseline_rules() {
        use TestStatus::*;
        assert!(check_baseline(&report(&[("a", Pass), ("s", Skipped)])).is_ok());
        match check_baseline(&report(&[("a", Pass), ("b", Fail)])) {
            Err(HarnessError::BaselineFailed { failing, .. }) => assert_eq!(failing, ["b"]),
            other => panic!("unexpected {other:?}"),
        }
    }
}
