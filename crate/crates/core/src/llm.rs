//! Client for OpenAI-compatible chat-completion endpoints, usable as a
//! solver agent and as a corruption client.
//!
//! The API key is read from the environment variable named in
//! [`LlmConfig::api_key_env`] and is never logged or printed.

use std::time::Duration;

use serde_json::{json, Value};

use crate::evalcore::{AgentClient, AgentRequest, AgentResponse, ChatMessage, Role, ToolCall};
use crate::pipeline::LlmConfig;
use crate::taskgen::{CorruptionClient, CorruptionContext};

/// Holds a secret; `Debug` never shows it.
#[derive(Clone)]
struct ApiKey(String);

impl std::fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ApiKey(<redacted>)")
    }
}

#[derive(Debug, Clone)]
pub struct LiveClient {
    http: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    temperature: f64,
    key: ApiKey,
}

impl LiveClient {
    pub fn from_config(config: &LlmConfig) -> Result<Self, String> {
        if config.model.is_empty() {
            return Err("llm.model is not set".into());
        }
        let key = std::env::var(&config.api_key_env)
            .map_err(|_| format!("environment variable {} is not set", config.api_key_env))?;
        Self::new(&config.base_url, &config.model, config.temperature, config.timeout_seconds, key)
    }

    pub fn new(base_url: &str, model: &str, temperature: f64, timeout_seconds: u64, key: String) -> Result<Self, String> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(timeout_seconds))
            .build()
            .map_err(|e| e.to_string())?;
        Ok(Self {
            http,
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            model: model.to_string(),
            temperature,
            key: ApiKey(key),
        })
    }

    /// Sends one completion request and returns the first choice's message.
    fn complete(&self, messages: Vec<Value>, tools: Option<Vec<Value>>) -> Result<Value, String> {
        let mut body = json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": messages,
        });
        if let Some(tools) = tools.filter(|t| !t.is_empty()) {
            body["tools"] = Value::Array(tools);
        }
        let response = self
            .http
            .post(&self.endpoint)
            .bearer_auth(&self.key.0)
            .json(&body)
            .send()
            .map_err(|e| format!("request failed: {}", e.without_url()))?;
        let status = response.status();
        let payload: Value = response.json().map_err(|e| format!("invalid response body: {}", e.without_url()))?;
        if !status.is_success() {
            let detail = payload["error"]["message"].as_str().unwrap_or("no detail");
            return Err(format!("endpoint returned {status}: {detail}"));
        }
        payload["choices"][0]["message"]
            .as_object()
            .map(|m| Value::Object(m.clone()))
            .ok_or_else(|| "response has no choices".to_string())
    }
}

fn wire_message(m: &ChatMessage) -> Value {
    match (m.role, &m.tool_call, &m.tool_call_id) {
        (Role::Assistant, Some(call), _) => json!({
            "role": "assistant",
            "content": if m.content.is_empty() { Value::Null } else { Value::String(m.content.clone()) },
            "tool_calls": [{
                "id": call.id,
                "type": "function",
                "function": {"name": call.name, "arguments": call.arguments.to_string()},
            }],
        }),
        (Role::Tool, _, Some(id)) => json!({"role": "tool", "tool_call_id": id, "content": m.content}),
        (role, _, _) => json!({
            "role": serde_json::to_value(role).expect("role serializes"),
            "content": m.content,
        }),
    }
}

impl AgentClient for LiveClient {
    fn label(&self) -> String {
        format!("live-{}", self.model)
    }

    fn respond(&mut self, request: &AgentRequest<'_>) -> Result<AgentResponse, String> {
        let messages = request.messages.iter().map(wire_message).collect();
        let tools = request
            .tools
            .iter()
            .map(|t| {
                json!({
                    "type": "function",
                    "function": {"name": t.name, "description": t.description, "parameters": t.parameters},
                })
            })
            .collect();
        let message = self.complete(messages, Some(tools))?;
        if let Some(call) = message["tool_calls"].as_array().and_then(|c| c.first()) {
            let raw = call["function"]["arguments"].as_str().unwrap_or("{}");
            // malformed arguments reach the session, which rejects them
            let arguments = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            return Ok(AgentResponse::ToolCall(ToolCall {
                id: call["id"].as_str().unwrap_or("call").to_string(),
                name: call["function"]["name"].as_str().unwrap_or_default().to_string(),
                arguments,
            }));
        }
        Ok(AgentResponse::FinalText(message["content"].as_str().unwrap_or_default().to_string()))
    }
}

/// The first fenced code block of `text`, or the whole text when it
/// contains a definition and no fence.
pub fn extract_code(text: &str) -> Option<String> {
    if let Some(start) = text.find("```") {
        let rest = &text[start + 3..];
        let body_start = rest.find('\n').map_or(rest.len(), |i| i + 1);
        let body = &rest[body_start..];
        let end = body.find("```").unwrap_or(body.len());
        let code = body[..end].trim_end();
        return (!code.trim().is_empty()).then(|| format!("{code}\n"));
    }
    let t = text.trim_matches('\n');
    (t.contains("def ") || t.contains("class ")).then(|| format!("{}\n", t.trim_end()))
}

impl CorruptionClient for LiveClient {
    fn propose(&self, ctx: &CorruptionContext<'_>) -> Result<Option<String>, String> {
        let mut messages = vec![json!({"role": "user", "content": ctx.prompt})];
        for f in ctx.history {
            messages.push(json!({"role": "assistant", "content": format!("```python\n{}```", f.candidate)}));
            let mut note = f.message.clone();
            if !f.failing_tests.is_empty() {
                note.push_str(&format!("\nFailing tests: {}", f.failing_tests.join(", ")));
            }
            note.push_str(&format!("\nSubmissions left: {}", ctx.remaining_submissions));
            messages.push(json!({"role": "user", "content": note}));
        }
        let message = self.complete(messages, None)?;
        Ok(message["content"].as_str().and_then(extract_code))
    }
}
