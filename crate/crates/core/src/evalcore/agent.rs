//! Chat-with-tools agent interface and the scripted agents.

use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::trajectory::{read_calls, RecordedCall};
use super::EvalError;
use crate::taskgen::apply::read_unit_source;
use crate::taskgen::{TaskInstance, TaskMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub id: String,
    pub name: String,
    pub arguments: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call: Option<ToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
            tool_call: None,
            tool_call_id: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    /// JSON schema of the arguments object.
    pub parameters: Value,
}

impl ToolSpec {
    pub fn new(name: &str, description: &str, parameters: Value) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            parameters,
        }
    }
}

/// Wire request: the conversation so far and the available tools.
#[derive(Debug, Clone, Serialize)]
pub struct AgentRequest<'a> {
    pub messages: &'a [ChatMessage],
    pub tools: &'a [ToolSpec],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentResponse {
    ToolCall(ToolCall),
    FinalText(String),
}

pub trait AgentClient: Send {
    /// Label used in trajectory paths and reports.
    fn label(&self) -> String;
    fn respond(&mut self, request: &AgentRequest<'_>) -> Result<AgentResponse, String>;
}

/// Agent that issues a fixed sequence of calls, then stops.
#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    label: String,
    calls: VecDeque<RecordedCall>,
    issued: usize,
}

impl ScriptedAgent {
    pub fn new(label: impl Into<String>, calls: impl IntoIterator<Item = RecordedCall>) -> Self {
        Self {
            label: label.into(),
            calls: calls.into_iter().collect(),
            issued: 0,
        }
    }

    /// Convenience constructor from `(tool, arguments)` pairs.
    pub fn from_pairs(label: impl Into<String>, calls: impl IntoIterator<Item = (&'static str, Value)>) -> Self {
        Self::new(
            label,
            calls.into_iter().map(|(tool, arguments)| RecordedCall {
                tool: tool.to_string(),
                arguments,
            }),
        )
    }
}

impl AgentClient for ScriptedAgent {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn respond(&mut self, _request: &AgentRequest<'_>) -> Result<AgentResponse, String> {
        Ok(match self.calls.pop_front() {
            Some(c) => {
                self.issued += 1;
                AgentResponse::ToolCall(ToolCall {
                    id: format!("call_{}", self.issued),
                    name: c.tool,
                    arguments: c.arguments,
                })
            }
            None => AgentResponse::FinalText("done".into()),
        })
    }
}

/// Makes no calls.
#[derive(Debug, Clone, Default)]
pub struct NullAgent;

impl AgentClient for NullAgent {
    fn label(&self) -> String {
        "null".into()
    }

    fn respond(&mut self, _request: &AgentRequest<'_>) -> Result<AgentResponse, String> {
        Ok(AgentResponse::FinalText("no attempt".into()))
    }
}

/// Replays the calls recorded in a trajectory directory.
#[derive(Debug, Clone)]
pub struct ReplayAgent(ScriptedAgent);

impl ReplayAgent {
    pub fn new(label: impl Into<String>, calls: Vec<RecordedCall>) -> Self {
        Self(ScriptedAgent::new(label, calls))
    }

    pub fn from_dir(label: impl Into<String>, dir: &Path) -> Result<Self, EvalError> {
        Ok(Self::new(label, read_calls(dir)?))
    }
}

impl AgentClient for ReplayAgent {
    fn label(&self) -> String {
        self.0.label()
    }

    fn respond(&mut self, request: &AgentRequest<'_>) -> Result<AgentResponse, String> {
        self.0.respond(request)
    }
}

/// Original source of each target, read from the pristine tree and checked
/// against the recorded digests.
pub fn original_sources(task: &TaskInstance, source_root: &Path) -> Result<Vec<(String, String)>, EvalError> {
    task.corruptions
        .iter()
        .map(|c| {
            let source = read_unit_source(source_root, &c.target)
                .map_err(|e| EvalError::SnapshotFailure(e.to_string()))?;
            if crate::digest::sha256_hex(&source) != c.original_digest {
                return Err(EvalError::SnapshotFailure(format!("{} changed since generation", c.target)));
            }
            Ok((c.target.to_string(), source))
        })
        .collect()
}

fn restore_calls(mode: TaskMode, originals: &[(String, String)]) -> Vec<RecordedCall> {
    originals
        .iter()
        .map(|(unit, body)| match mode {
            TaskMode::Remove => RecordedCall {
                tool: "submit_attempt".into(),
                arguments: json!({"body": body}),
            },
            TaskMode::Discovery => RecordedCall {
                tool: "replace_function".into(),
                arguments: json!({"unit_id": unit, "body": body}),
            },
        })
        .collect()
}

/// Submits the original bodies of every target.
#[derive(Debug, Clone)]
pub struct OracleAgent(ScriptedAgent);

impl OracleAgent {
    pub fn new(task: &TaskInstance, source_root: &Path) -> Result<Self, EvalError> {
        let originals = original_sources(task, source_root)?;
        Ok(Self(ScriptedAgent::new("oracle", restore_calls(task.mode, &originals))))
    }
}

impl AgentClient for OracleAgent {
    fn label(&self) -> String {
        self.0.label()
    }

    fn respond(&mut self, request: &AgentRequest<'_>) -> Result<AgentResponse, String> {
        self.0.respond(request)
    }
}

/// Restores only the first `competence` targets of a task.
#[derive(Debug, Clone)]
pub struct CompetenceGradedAgent(ScriptedAgent);

impl CompetenceGradedAgent {
    pub fn new(task: &TaskInstance, source_root: &Path, competence: usize) -> Result<Self, EvalError> {
        let mut originals = original_sources(task, source_root)?;
        originals.truncate(competence);
        Ok(Self(ScriptedAgent::new(
            format!("competence-{competence}"),
            restore_calls(task.mode, &originals),
        )))
    }
}

impl AgentClient for CompetenceGradedAgent {
    fn label(&self) -> String {
        self.0.label()
    }

    fn respond(&mut self, request: &AgentRequest<'_>) -> Result<AgentResponse, String> {
        self.0.respond(request)
    }
}
