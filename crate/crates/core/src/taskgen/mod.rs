//! Task generation: corrupting units, validating the resulting failures,
//! and selecting task sets.

pub mod adversarial;
pub mod apply;
pub mod deletion;
pub mod select;
pub mod validate;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use adversarial::{
    adversarial_corrupt, adversarial_corrupt_detailed, relevant_tests, render_corruption_prompt,
    render_prompt_template, AdversarialConfig, AdversarialOutcome, CorruptionClient, CorruptionContext,
    CorruptionFeedback, MutationCorruptor, ReplayCorruptor, CORRUPTION_PROMPT_TEMPLATE,
};
pub use apply::{apply_corruptions, apply_replacement, ApplyError};
pub use deletion::{delete_function, PLACEHOLDER_STATEMENT};
pub use select::{select_hard_set, select_multifunction_sets, MultiSelection};
pub use validate::{run_corrupted, validate_task, CorruptedRun, RejectReason, Validation, ValidationConfig};

use crate::digest::sha256_hex;
use crate::metrics::{MetricsRecord, NormalizedMetrics};
use crate::python::SyntaxError;
use crate::repo::UnitId;

pub const GENERATOR_VERSION: &str = concat!("faultline-taskgen/", env!("CARGO_PKG_VERSION"));

#[derive(Debug, thiserror::Error)]
pub enum TaskgenError {
    #[error("unknown unit: {0}")]
    UnknownUnit(String),
    #[error("unsupported target {target}: {reason}")]
    UnsupportedTarget { target: String, reason: String },
    #[error("corruption client failed: {0}")]
    ClientFailure(String),
    #[error("no qualifying corruption for {target} after {attempts} attempts")]
    NoValidCorruption { target: String, attempts: usize },
    #[error(transparent)]
    Apply(#[from] ApplyError),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Harness(#[from] crate::harness::HarnessError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid task file {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorruptionMethod {
    Deletion,
    Adversarial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskMode {
    Remove,
    Discovery,
}

impl std::fmt::Display for TaskMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TaskMode::Remove => "remove",
            TaskMode::Discovery => "discovery",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corruption {
    pub target: UnitId,
    pub method: CorruptionMethod,
    /// Full replacement source of the unit, at its original indentation.
    pub corrupted_body: String,
    /// sha256 of the original unit source.
    pub original_digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoRef {
    pub source: String,
    pub commit: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    pub version: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetMetrics {
    pub record: MetricsRecord,
    pub normalized: NormalizedMetrics,
}

/// `task.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub task_id: String,
    pub repo_ref: RepoRef,
    pub mode: TaskMode,
    pub corruptions: Vec<Corruption>,
    pub failing_tests: Vec<String>,
    pub metrics: BTreeMap<UnitId, TargetMetrics>,
    pub generator: GeneratorInfo,
}

impl TaskInstance {
    pub fn targets(&self) -> Vec<&UnitId> {
        self.corruptions.iter().map(|c| &c.target).collect()
    }

    /// Largest percentile of `metric` over the task's targets.
    pub fn max_percentile(&self, metric: &str) -> Option<f64> {
        self.metrics
            .values()
            .filter_map(|m| m.normalized.percentile(metric))
            .reduce(f64::max)
    }

    /// Checks the structural invariants of a stored task.
    pub fn check_invariants(&self, min_failing: usize) -> Result<(), String> {
        if self.corruptions.is_empty() {
            return Err("task has no corruptions".into());
        }
        if self.failing_tests.len() < min_failing {
            return Err(format!("{} failing tests < {min_failing}", self.failing_tests.len()));
        }
        match self.mode {
            TaskMode::Remove if self.corruptions.len() != 1 || self.corruptions[0].method != CorruptionMethod::Deletion => {
                Err("remove-mode tasks carry exactly one deletion".into())
            }
            TaskMode::Discovery if self.corruptions.iter().any(|c| c.method != CorruptionMethod::Adversarial) => {
                Err("discovery-mode corruptions must be adversarial".into())
            }
            _ => Ok(()),
        }
    }
}

/// Content-addressed id: hash of commit, mode, targets and corrupted bodies.
pub fn task_id(commit: &str, mode: TaskMode, corruptions: &[Corruption]) -> String {
    let mut material = format!("{commit}\n{mode}\n");
    for c in corruptions {
        material.push_str(c.target.as_str());
        material.push('\n');
        material.push_str(&sha256_hex(&c.corrupted_body));
        material.push('\n');
    }
    sha256_hex(material)[..16].to_string()
}

pub fn task_path(store: &Path, task_id: &str) -> PathBuf {
    store.join("tasks").join(task_id).join("task.json")
}

pub fn write_task(store: &Path, task: &TaskInstance) -> Result<PathBuf, TaskgenError> {
    let path = task_path(store, &task.task_id);
    let io = |source| TaskgenError::Io {
        path: path.clone(),
        source,
    };
    std::fs::create_dir_all(path.parent().unwrap_or(store)).map_err(io)?;
    let mut text = serde_json::to_string_pretty(task).map_err(|source| TaskgenError::Json {
        path: path.clone(),
        source,
    })?;
    text.push('\n');
    std::fs::write(&path, text).map_err(io)?;
    Ok(path)
}

pub fn read_task(path: &Path) -> Result<TaskInstance, TaskgenError> {
    let text = std::fs::read_to_string(path).map_err(|source| TaskgenError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| TaskgenError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// All tasks in a store, sorted by id.
pub fn load_tasks(store: &Path) -> Result<Vec<TaskInstance>, TaskgenError> {
    let dir = store.join("tasks");
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut ids: Vec<String> = std::fs::read_dir(&dir)
        .map_err(|source| TaskgenError::Io {
            path: dir.clone(),
            source,
        })?
        .filter_map(Result::ok)
        .filter(|e| e.path().join("task.json").is_file())
        .map(|e| e.file_name().to_string_lossy().to_string())
        .collect();
    ids.sort();
    ids.iter().map(|id| read_task(&task_path(store, id))).collect()
}
