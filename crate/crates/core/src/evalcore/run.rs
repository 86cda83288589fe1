//! The agent loop.

use std::path::Path;

use super::agent::{AgentClient, AgentRequest, AgentResponse, ChatMessage, Role};
use super::prompts::{render_system_prompt, tool_specs};
use super::session::{error_json, open_session, SessionOptions, SessionState};
use super::trajectory::{RecordedCall, Trajectory};
use super::{BudgetConfig, EvalError};
use crate::harness::SuiteReport;
use crate::taskgen::TaskInstance;

/// Drives `agent` through one session until it stops, solves the task or
/// runs out of attempts. Agent failures end the session with state `failed`
/// and the reason recorded in the outcome.
pub fn run_agent(
    task: &TaskInstance,
    source_root: &Path,
    baseline: &SuiteReport,
    budget: BudgetConfig,
    agent: &mut dyn AgentClient,
    mut options: SessionOptions,
) -> Result<Trajectory, EvalError> {
    options.agent = agent.label();
    let mut session = open_session(task, source_root, baseline, budget, options)?;
    let tools = tool_specs(task.mode);
    let mut messages = vec![
        ChatMessage::new(Role::System, render_system_prompt(task.mode, budget)),
        ChatMessage::new(Role::User, session.description()),
    ];
    let mut calls = Vec::new();
    let max_turns = 4 * (budget.max_tool_uses + budget.max_attempts) + 16;
    let mut reason = None;

    for _ in 0..max_turns {
        if session.state() != SessionState::Active {
            break;
        }
        let response = match agent.respond(&AgentRequest {
            messages: &messages,
            tools: &tools,
        }) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("agent {} failed on task {}: {e}", agent.label(), task.task_id);
                reason = Some(format!("client_failure: {e}"));
                break;
            }
        };
        match response {
            AgentResponse::FinalText(text) => {
                messages.push(ChatMessage::new(Role::Assistant, text));
                reason = Some("agent_stop".into());
                break;
            }
            AgentResponse::ToolCall(call) => {
                let content = match session.invoke(&call.name, &call.arguments) {
                    Ok(v) => v.to_string(),
                    Err(e) => error_json(&e).to_string(),
                };
                calls.push(RecordedCall {
                    tool: call.name.clone(),
                    arguments: call.arguments.clone(),
                });
                let mut assistant = ChatMessage::new(Role::Assistant, String::new());
                let id = call.id.clone();
                assistant.tool_call = Some(call);
                messages.push(assistant);
                let mut reply = ChatMessage::new(Role::Tool, content);
                reply.tool_call_id = Some(id);
                messages.push(reply);
            }
        }
    }
    if reason.is_none() && session.state() == SessionState::Active {
        reason = Some("turn_limit".into());
    }
    let mut trajectory = session.finish(reason);
    trajectory.calls = calls;
    Ok(trajectory)
}
