//! Trajectory records and their JSON-lines files.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::session::SessionState;
use super::{BudgetConfig, EvalError};
use crate::taskgen::TaskMode;

pub const TRAJECTORY_FILE: &str = "trajectory.jsonl";
pub const CALLS_FILE: &str = "calls.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    /// Charged information-gathering call.
    Info,
    /// Charged submission.
    Submit,
    /// Refused call that consumed no budget.
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub kind: EventKind,
    pub tool: String,
    pub args_digest: String,
    pub result_digest: String,
    /// Seconds since session start, or the sequence number under a logical clock.
    pub t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failing_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionRecord {
    pub attempt: usize,
    pub patch_digest: String,
    pub failing_count: usize,
    pub passed: bool,
}

/// Terminal line of a trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub score: u8,
    pub solved_at_attempt: Option<usize>,
    pub used_tools: usize,
    pub used_attempts: usize,
    pub state: SessionState,
    pub session_id: String,
    pub task_id: String,
    pub mode: TaskMode,
    pub agent: String,
    pub budget: BudgetConfig,
    pub submissions: Vec<SubmissionRecord>,
    #[serde(default)]
    pub reason: Option<String>,
}

/// A tool call as issued by the agent, kept for replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedCall {
    pub tool: String,
    pub arguments: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub events: Vec<Event>,
    pub outcome: Outcome,
    #[serde(default)]
    pub calls: Vec<RecordedCall>,
}

impl Trajectory {
    pub fn info_calls(&self) -> usize {
        self.events.iter().filter(|e| e.kind == EventKind::Info).count()
    }

    pub fn submissions(&self) -> usize {
        self.events.iter().filter(|e| e.kind == EventKind::Submit).count()
    }

    /// Charged calls per tool name.
    pub fn tool_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for e in self.events.iter().filter(|e| e.kind != EventKind::Rejected) {
            *out.entry(e.tool.clone()).or_insert(0) += 1;
        }
        out
    }

    /// `trajectory.jsonl` contents: one event per line, then the outcome.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("event serializes"));
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&self.outcome).expect("outcome serializes"));
        out.push('\n');
        out
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, e: impl std::fmt::Display) -> EvalError {
    EvalError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, format!("line {line}: {e}")),
    }
}

/// Writes `trajectory.jsonl` and `calls.jsonl` into `dir`.
pub fn write_trajectory(dir: &Path, trajectory: &Trajectory) -> Result<PathBuf, EvalError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_calls(dir, &trajectory.calls)?;
    let path = dir.join(TRAJECTORY_FILE);
    std::fs::write(&path, trajectory.to_jsonl()).map_err(io_err(&path))?;
    Ok(path)
}

pub fn write_calls(dir: &Path, calls: &[RecordedCall]) -> Result<(), EvalError> {
    let path = dir.join(CALLS_FILE);
    let mut f = std::fs::File::create(&path).map_err(io_err(&path))?;
    for c in calls {
        let line = serde_json::to_string(c).expect("call serializes");
        writeln!(f, "{line}").map_err(io_err(&path))?;
    }
    Ok(())
}

pub fn read_calls(dir: &Path) -> Result<Vec<RecordedCall>, EvalError> {
    let path = dir.join(CALLS_FILE);
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| parse_err(&path, i + 1, e)))
        .collect()
}

/// Reads a trajectory directory; `calls.jsonl` is optional.
pub fn read_trajectory(dir: &Path) -> Result<Trajectory, EvalError> {
    let path = dir.join(TRAJECTORY_FILE);
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let Some((last, events)) = lines.split_last() else {
        return Err(parse_err(&path, 0, "empty trajectory"));
    };
    let events = events
        .iter()
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| parse_err(&path, i + 1, e)))
        .collect::<Result<Vec<Event>, _>>()?;
    let outcome: Outcome = serde_json::from_str(last).map_err(|e| parse_err(&path, lines.len(), e))?;
    let calls = if dir.join(CALLS_FILE).is_file() {
        read_calls(dir)?
    } else {
        Vec::new()
    };
    Ok(Trajectory { events, outcome, calls })
}
