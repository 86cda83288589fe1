//! Budgeted tool environment in which a solver attempts a task: sessions,
//! tools, scoring, trajectories and agent clients.

pub mod agent;
pub mod prompts;
pub mod run;
pub mod session;
pub mod trajectory;

use serde::{Deserialize, Serialize};

pub use agent::{
    AgentClient, AgentRequest, AgentResponse, ChatMessage, CompetenceGradedAgent, NullAgent, OracleAgent,
    ReplayAgent, Role, ScriptedAgent, ToolCall, ToolSpec,
};
pub use prompts::{render_system_prompt, task_description, tool_specs};
pub use run::run_agent;
pub use session::{open_session, Clock, Session, SessionOptions, SessionState, SubmissionResult};
pub use trajectory::{
    read_calls, read_trajectory, write_calls, write_trajectory, Event, EventKind, Outcome, RecordedCall,
    SubmissionRecord, Trajectory,
};

/// Default size above which `read_file` returns a unit index instead of text.
pub const DEFAULT_READ_THRESHOLD: usize = 10_000;
/// Cap on `search_code` hits.
pub const SEARCH_HIT_CAP: usize = 200;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("tool budget exhausted")]
    BudgetExhausted,
    #[error("submission attempts exhausted")]
    AttemptsExhausted,
    #[error("path escapes the sandbox: {0}")]
    PathOutsideSandbox(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("invalid pattern: {0}")]
    InvalidPattern(String),
    #[error("unknown unit: {0}")]
    UnknownUnit(String),
    #[error("unparseable body: {0}")]
    UnparseableBody(String),
    #[error("invalid arguments: {0}")]
    InvalidArguments(String),
    #[error("tool {tool} is not available in {mode} mode")]
    WrongMode { tool: String, mode: String },
    #[error("only {0} may be modified in this task")]
    TargetMismatch(String),
    #[error("session is {0}")]
    SessionClosed(String),
    #[error("invalid budget: {0}")]
    InvalidBudget(String),
    #[error("could not prepare session sandbox: {0}")]
    SnapshotFailure(String),
    #[error("agent client failed: {0}")]
    ClientFailure(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl EvalError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            EvalError::BudgetExhausted => "budget_exhausted",
            EvalError::AttemptsExhausted => "attempts_exhausted",
            EvalError::PathOutsideSandbox(_) => "path_outside_sandbox",
            EvalError::NotFound(_) => "not_found",
            EvalError::InvalidPattern(_) => "invalid_pattern",
            EvalError::UnknownUnit(_) => "unknown_unit",
            EvalError::UnparseableBody(_) => "unparseable_body",
            EvalError::InvalidArguments(_) => "invalid_arguments",
            EvalError::WrongMode { .. } => "wrong_mode",
            EvalError::TargetMismatch(_) => "target_mismatch",
            EvalError::SessionClosed(_) => "session_closed",
            EvalError::InvalidBudget(_) => "invalid_budget",
            EvalError::SnapshotFailure(_) => "snapshot_failure",
            EvalError::ClientFailure(_) => "client_failure",
            EvalError::Io { .. } => "io",
        }
    }
}

/// Separate pools for information tools and submissions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BudgetConfig {
    pub max_tool_uses: usize,
    pub max_attempts: usize,
}

/// Named presets: `xs` 4/1, `small` 8/2, `default` 16/4, `xl` 32/8.
pub const BUDGET_PRESETS: [(&str, BudgetConfig); 4] = [
    ("xs", BudgetConfig { max_tool_uses: 4, max_attempts: 1 }),
    ("small", BudgetConfig { max_tool_uses: 8, max_attempts: 2 }),
    ("default", BudgetConfig { max_tool_uses: 16, max_attempts: 4 }),
    ("xl", BudgetConfig { max_tool_uses: 32, max_attempts: 8 }),
];

impl BudgetConfig {
    pub fn new(max_tool_uses: usize, max_attempts: usize) -> Result<Self, EvalError> {
        if max_tool_uses == 0 || max_attempts == 0 {
            return Err(EvalError::InvalidBudget(format!("{max_tool_uses}/{max_attempts}")));
        }
        Ok(Self {
            max_tool_uses,
            max_attempts,
        })
    }

    /// A preset name, or an explicit `tools/attempts` pair such as `16/4`.
    pub fn preset(name: &str) -> Result<Self, EvalError> {
        if let Some((_, b)) = BUDGET_PRESETS.iter().find(|(n, _)| *n == name) {
            return Ok(*b);
        }
        let parsed = name
            .split_once('/')
            .and_then(|(t, a)| Some((t.trim().parse().ok()?, a.trim().parse().ok()?)));
        match parsed {
            Some((t, a)) => Self::new(t, a),
            None => Err(EvalError::InvalidBudget(name.to_string())),
        }
    }
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BUDGET_PRESETS[2].1
    }
}

/// Information-gathering tools.
pub const INFO_TOOLS: [&str; 5] = [
    "list_directory",
    "search_code",
    "read_file",
    "list_file_functions",
    "read_function",
];
/// Modification tools.
pub const SUBMIT_TOOLS: [&str; 2] = ["submit_attempt", "replace_function"];

pub fn is_info_tool(name: &str) -> bool {
    INFO_TOOLS.contains(&name)
}
