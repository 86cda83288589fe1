//! End-to-end orchestration: ingest, generate, validate, evaluate, report.

pub mod config;
pub mod evaluate;
pub mod generate;
pub mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::{
    CorruptionClientKind, EvaluationConfig, GenerationConfig, GenerationMode, LlmConfig, PipelineConfig, RepoConfig,
    ReportConfig,
};
pub use evaluate::{cmd_evaluate, make_agent, AgentSpec, EvaluationSummary, TaskFilter};
pub use generate::{cmd_generate, cmd_ingest, cmd_validate, GenerationReport, IngestSummary, ValidationSummary};
pub use report::{cmd_report, load_trajectories, result_rows, FitResult, ReportSummary};

use crate::callgraph::CallGraph;
use crate::evalcore::EvalError;
use crate::harness::{HarnessError, SuiteExit, SuiteReport, TestOutcome, TestStatus};
use crate::metrics::MetricsError;
use crate::repo::{RepoError, RepoSnapshot};
use crate::taskgen::{TaskInstance, TaskgenError};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Repo(#[from] RepoError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("baseline failed: {0}")]
    BaselineFailed(HarnessError),
    #[error(transparent)]
    Harness(HarnessError),
    #[error(transparent)]
    Taskgen(TaskgenError),
    #[error("client failure: {0}")]
    ClientFailure(String),
    #[error("no tasks were generated")]
    NoTasksGenerated,
    #[error("{} task(s) failed re-validation", .0.len())]
    ValidationFailed(Vec<String>),
    #[error("unknown agent: {0}")]
    UnknownAgent(String),
    #[error("no trajectories found under {0}")]
    NoResults(PathBuf),
    #[error("task store {0} is locked by another writer")]
    StoreLocked(PathBuf),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid json in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl From<TaskgenError> for PipelineError {
    fn from(e: TaskgenError) -> Self {
        match e {
            TaskgenError::ClientFailure(m) => PipelineError::ClientFailure(m),
            other => PipelineError::Taskgen(other),
        }
    }
}

impl From<HarnessError> for PipelineError {
    fn from(e: HarnessError) -> Self {
        match e {
            e @ HarnessError::BaselineFailed { .. } => PipelineError::BaselineFailed(e),
            other => PipelineError::Harness(other),
        }
    }
}

impl PipelineError {
    /// Process exit code: 2 validation, 3 baseline, 4 client, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::BaselineFailed(_) => 3,
            PipelineError::ClientFailure(_) => 4,
            PipelineError::Eval(EvalError::ClientFailure(_)) => 4,
            PipelineError::Config(_)
            | PipelineError::NoTasksGenerated
            | PipelineError::ValidationFailed(_)
            | PipelineError::UnknownAgent(_)
            | PipelineError::NoResults(_) => 2,
            _ => 1,
        }
    }
}

pub(crate) fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_error(dir))?;
    }
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(io_error(path))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(io_error(path))?;
    serde_json::from_str(&text).map_err(|source| PipelineError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Baseline outcomes as persisted (no timings).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredBaseline {
    pub test_command: String,
    pub outcomes: BTreeMap<String, TestStatus>,
}

impl StoredBaseline {
    pub fn from_report(report: &SuiteReport, test_command: &str) -> Self {
        Self {
            test_command: test_command.to_string(),
            outcomes: report.status_map(),
        }
    }

    pub fn to_report(&self) -> SuiteReport {
        SuiteReport {
            outcomes: self
                .outcomes
                .iter()
                .map(|(id, status)| TestOutcome {
                    test_id: id.clone(),
                    status: *status,
                    duration: 0.0,
                })
                .collect(),
            wall_clock: 0.0,
            exit: SuiteExit::Completed,
        }
    }
}

/// Directory layout of a task store.
#[derive(Debug, Clone)]
pub struct Store {
    pub root: PathBuf,
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn snapshot_path(&self) -> PathBuf {
        self.root.join("repo.snapshot.json")
    }

    pub fn metrics_path(&self) -> PathBuf {
        self.root.join("metrics.csv")
    }

    pub fn correlations_path(&self) -> PathBuf {
        self.root.join("correlations.csv")
    }

    pub fn baseline_path(&self) -> PathBuf {
        self.root.join("baseline.json")
    }

    pub fn generation_report_path(&self) -> PathBuf {
        self.root.join("generation_report.json")
    }

    pub fn tasks_dir(&self) -> PathBuf {
        self.root.join("tasks")
    }

    pub fn trajectories_dir(&self) -> PathBuf {
        self.root.join("trajectories")
    }

    pub fn trajectory_dir(&self, label: &str, task_id: &str) -> PathBuf {
        self.trajectories_dir().join(sanitize_label(label)).join(task_id)
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }

    pub fn lock_path(&self) -> PathBuf {
        self.root.join(".lock")
    }

    pub fn is_locked(&self) -> bool {
        self.lock_path().exists()
    }

    /// Takes the single-writer lock until the guard drops.
    pub fn lock(&self) -> Result<StoreLock, PipelineError> {
        std::fs::create_dir_all(&self.root).map_err(io_error(&self.root))?;
        let path = self.lock_path();
        match std::fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(StoreLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(PipelineError::StoreLocked(self.root.clone())),
            Err(e) => Err(io_error(&path)(e)),
        }
    }

    pub fn load_baseline(&self) -> Result<SuiteReport, PipelineError> {
        Ok(read_json::<StoredBaseline>(&self.baseline_path())?.to_report())
    }

    pub fn load_snapshot(&self) -> Result<RepoSnapshot, PipelineError> {
        read_json(&self.snapshot_path())
    }

    pub fn load_graph(&self) -> Result<CallGraph, PipelineError> {
        Ok(CallGraph::from_snapshot(&self.load_snapshot()?))
    }

    pub fn load_tasks(&self) -> Result<Vec<TaskInstance>, PipelineError> {
        Ok(crate::taskgen::load_tasks(&self.root)?)
    }
}

pub struct StoreLock {
    path: PathBuf,
}

impl Drop for StoreLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

/// Agent labels become directory names.
pub fn sanitize_label(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

/// A rayon pool with `jobs` threads (0 = default).
pub(crate) fn pool(jobs: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool")
}
