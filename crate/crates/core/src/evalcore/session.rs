//! Evaluation sessions: a corrupted sandbox, budgets, tools and scoring.

use std::collections::BTreeMap;
use std::path::{Component, Path, PathBuf};
use std::time::Instant;

use regex::RegexBuilder;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::trajectory::{Event, EventKind, Outcome, SubmissionRecord, Trajectory};
use super::{is_info_tool, prompts, SUBMIT_TOOLS, BudgetConfig, EvalError, DEFAULT_READ_THRESHOLD, SEARCH_HIT_CAP};
use crate::digest::{json_digest, sha256_hex};
use crate::harness::{failing_diff, run_suite_with, RunnerConfig, Sandbox, SuiteExit, SuiteReport};
use crate::python;
use crate::repo::{is_test_path, module_name, python_files, UnitId};
use crate::taskgen::{apply_corruptions, apply_replacement, ApplyError, TaskInstance, TaskMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionState {
    Active,
    Exhausted,
    Solved,
    Failed,
}

impl SessionState {
    pub fn as_str(&self) -> &'static str {
        match self {
            SessionState::Active => "active",
            SessionState::Exhausted => "exhausted",
            SessionState::Solved => "solved",
            SessionState::Failed => "failed",
        }
    }
}

/// Event timestamps: sequence numbers, or seconds since the session opened.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Clock {
    #[default]
    Logical,
    Wall,
}

#[derive(Debug, Clone)]
pub struct SessionOptions {
    pub runner: RunnerConfig,
    pub read_threshold: usize,
    pub clock: Clock,
    /// Defaults to a digest of task id and agent label.
    pub session_id: Option<String>,
    pub agent: String,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self {
            runner: RunnerConfig::default(),
            read_threshold: DEFAULT_READ_THRESHOLD,
            clock: Clock::Logical,
            session_id: None,
            agent: "unnamed".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionResult {
    pub attempt: usize,
    pub passed: bool,
    /// Previously passing tests that do not pass now.
    pub failing_tests: Vec<String>,
    pub failing_count: usize,
    /// `completed`, `timeout` or `crashed`.
    pub suite: String,
    pub remaining_attempts: usize,
}

pub struct Session {
    id: String,
    task: TaskInstance,
    sandbox: Sandbox,
    budget: BudgetConfig,
    used_tools: usize,
    used_attempts: usize,
    edits: BTreeMap<UnitId, Vec<String>>,
    state: SessionState,
    baseline: SuiteReport,
    options: SessionOptions,
    test_digests: BTreeMap<String, String>,
    events: Vec<Event>,
    submissions: Vec<SubmissionRecord>,
    started: Instant,
    last_passed: bool,
    passed_at: Option<usize>,
    outcome: Option<Outcome>,
}

fn test_file_digests(root: &Path) -> BTreeMap<String, String> {
    python_files(root)
        .into_iter()
        .filter(|f| is_test_path(f))
        .map(|f| {
            let digest = std::fs::read(root.join(&f)).map(sha256_hex).unwrap_or_default();
            (f, digest)
        })
        .collect()
}

/// Copies `source_root`, applies the task's corruptions and opens a session.
pub fn open_session(
    task: &TaskInstance,
    source_root: &Path,
    baseline: &SuiteReport,
    budget: BudgetConfig,
    options: SessionOptions,
) -> Result<Session, EvalError> {
    BudgetConfig::new(budget.max_tool_uses, budget.max_attempts)?;
    if task.corruptions.is_empty() {
        return Err(EvalError::SnapshotFailure(format!("task {} has no corruptions", task.task_id)));
    }
    let sandbox = Sandbox::create(source_root).map_err(|e| EvalError::SnapshotFailure(e.to_string()))?;
    apply_corruptions(sandbox.path(), &task.corruptions).map_err(|e| EvalError::SnapshotFailure(e.to_string()))?;
    let id = options
        .session_id
        .clone()
        .unwrap_or_else(|| sha256_hex(format!("{}\n{}", task.task_id, options.agent))[..32].to_string());
    Ok(Session {
        id,
        task: task.clone(),
        test_digests: test_file_digests(sandbox.path()),
        sandbox,
        budget,
        used_tools: 0,
        used_attempts: 0,
        edits: BTreeMap::new(),
        state: SessionState::Active,
        baseline: baseline.clone(),
        options,
        events: Vec::new(),
        submissions: Vec::new(),
        started: Instant::now(),
        last_passed: false,
        passed_at: None,
        outcome: None,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PathArgs {
    #[serde(default)]
    path: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SearchArgs {
    pattern: String,
    #[serde(default)]
    is_regex: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UnitArgs {
    unit_id: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SubmitArgs {
    body: String,
    #[serde(default)]
    unit_id: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReplaceArgs {
    unit_id: String,
    body: String,
}

fn parse_args<T: serde::de::DeserializeOwned>(args: &Value) -> Result<T, EvalError> {
    let args = if args.is_null() { json!({}) } else { args.clone() };
    serde_json::from_value(args).map_err(|e| EvalError::InvalidArguments(e.to_string()))
}

fn parse_unit_id(raw: &str) -> Result<UnitId, EvalError> {
    UnitId::parse(raw).ok_or_else(|| EvalError::UnknownUnit(raw.to_string()))
}

/// Lookup misses consume budget: the call was well-formed and ran.
fn charged(err: &EvalError) -> bool {
    matches!(err, EvalError::NotFound(_) | EvalError::UnknownUnit(_))
}

pub fn error_json(err: &EvalError) -> Value {
    json!({"code": err.code(), "message": err.to_string()})
}

impl Session {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn task(&self) -> &TaskInstance {
        &self.task
    }

    pub fn mode(&self) -> TaskMode {
        self.task.mode
    }

    pub fn budget(&self) -> BudgetConfig {
        self.budget
    }

    pub fn used_tools(&self) -> usize {
        self.used_tools
    }

    pub fn used_attempts(&self) -> usize {
        self.used_attempts
    }

    pub fn remaining_tools(&self) -> usize {
        self.budget.max_tool_uses - self.used_tools
    }

    pub fn remaining_attempts(&self) -> usize {
        self.budget.max_attempts - self.used_attempts
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn is_closed(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn sandbox_path(&self) -> &Path {
        self.sandbox.path()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn edits(&self) -> &BTreeMap<UnitId, Vec<String>> {
        &self.edits
    }

    /// Solver-facing task statement for this session's mode.
    pub fn description(&self) -> String {
        prompts::task_description(&self.task)
    }

    /// Tool names available in this session's mode.
    pub fn tools(&self) -> Vec<&'static str> {
        prompts::tool_names(self.task.mode)
    }

    /// Runs one tool call and records it. Refused calls are recorded as
    /// `rejected` events and consume no budget.
    pub fn invoke(&mut self, tool: &str, args: &Value) -> Result<Value, EvalError> {
        if self.outcome.is_some() {
            return Err(EvalError::SessionClosed("closed".into()));
        }
        let result = self.dispatch(tool, args);
        let (kind, result_json, failing) = match &result {
            Ok((value, kind)) => {
                let failing = value.get("failing_count").and_then(Value::as_u64).map(|n| n as usize);
                (*kind, value.clone(), failing.filter(|_| *kind == EventKind::Submit))
            }
            Err((err, kind)) => (*kind, error_json(err), None),
        };
        let seq = self.events.len() as u64 + 1;
        let t = match self.options.clock {
            Clock::Logical => seq as f64,
            Clock::Wall => (self.started.elapsed().as_secs_f64() * 1000.0).round() / 1000.0,
        };
        self.events.push(Event {
            seq,
            kind,
            tool: tool.to_string(),
            args_digest: json_digest(args),
            result_digest: json_digest(&result_json),
            t,
            failing_count: failing,
        });
        result.map(|(v, _)| v).map_err(|(e, _)| e)
    }

    fn dispatch(&mut self, tool: &str, args: &Value) -> Result<(Value, EventKind), (EvalError, EventKind)> {
        let refuse = |e| (e, EventKind::Rejected);
        if self.state != SessionState::Active {
            return Err(refuse(EvalError::SessionClosed(self.state.as_str().into())));
        }
        if !self.tools().contains(&tool) {
            let err = if is_info_tool(tool) || SUBMIT_TOOLS.contains(&tool) {
                EvalError::WrongMode {
                    tool: tool.into(),
                    mode: self.task.mode.to_string(),
                }
            } else {
                EvalError::InvalidArguments(format!("unknown tool `{tool}`"))
            };
            return Err(refuse(err));
        }
        if is_info_tool(tool) {
            if self.used_tools >= self.budget.max_tool_uses {
                return Err(refuse(EvalError::BudgetExhausted));
            }
            let result = match tool {
                "list_directory" => parse_args::<PathArgs>(args).and_then(|a| self.list_directory(&a.path)),
                "search_code" => parse_args::<SearchArgs>(args).and_then(|a| self.search_code(&a.pattern, a.is_regex)),
                "read_file" => parse_args::<PathArgs>(args).and_then(|a| self.read_file(&a.path)),
                "list_file_functions" => parse_args::<PathArgs>(args).and_then(|a| self.list_file_functions(&a.path)),
                _ => parse_args::<UnitArgs>(args).and_then(|a| self.read_function(&a.unit_id)),
            };
            return match result {
                Ok(v) => {
                    self.used_tools += 1;
                    Ok((v, EventKind::Info))
                }
                Err(e) if charged(&e) => {
                    self.used_tools += 1;
                    Err((e, EventKind::Info))
                }
                Err(e) => Err(refuse(e)),
            };
        }

        if self.used_attempts >= self.budget.max_attempts {
            return Err(refuse(EvalError::AttemptsExhausted));
        }
        let (unit, body) = match tool {
            "submit_attempt" => {
                let a: SubmitArgs = parse_args(args).map_err(refuse)?;
                let target = self.task.corruptions[0].target.clone();
                if a.unit_id.as_deref().is_some_and(|u| u != target.as_str()) {
                    return Err(refuse(EvalError::TargetMismatch(target.to_string())));
                }
                (target, a.body)
            }
            _ => {
                let a: ReplaceArgs = parse_args(args).map_err(refuse)?;
                let unit = parse_unit_id(&a.unit_id).map_err(refuse)?;
                self.resolve(unit.file()).map_err(refuse)?;
                if crate::taskgen::apply::read_unit_source(self.sandbox.path(), &unit).is_err() {
                    return Err(refuse(EvalError::UnknownUnit(unit.to_string())));
                }
                (unit, a.body)
            }
        };
        self.submit(unit, body).map(|v| (v, EventKind::Submit)).map_err(|e| (e, EventKind::Submit))
    }

    /// Resolves a sandbox-relative path, refusing anything outside it.
    fn resolve(&self, rel: &str) -> Result<PathBuf, EvalError> {
        let root = self.sandbox.path();
        let mut out = PathBuf::new();
        for comp in Path::new(rel.trim_start_matches('/')).components() {
            match comp {
                Component::Normal(c) => out.push(c),
                Component::CurDir | Component::RootDir => {}
                Component::ParentDir => {
                    if !out.pop() {
                        return Err(EvalError::PathOutsideSandbox(rel.to_string()));
                    }
                }
                Component::Prefix(_) => return Err(EvalError::PathOutsideSandbox(rel.to_string())),
            }
        }
        let full = root.join(&out);
        if let (Ok(canon), Ok(canon_root)) = (full.canonicalize(), root.canonicalize()) {
            if !canon.starts_with(&canon_root) {
                return Err(EvalError::PathOutsideSandbox(rel.to_string()));
            }
        }
        Ok(full)
    }

    fn rel_of(&self, full: &Path) -> String {
        full.strip_prefix(self.sandbox.path())
            .map(|p| p.to_string_lossy().replace('\\', "/"))
            .unwrap_or_default()
    }

    fn list_directory(&self, rel: &str) -> Result<Value, EvalError> {
        let dir = self.resolve(rel)?;
        if !dir.is_dir() {
            return Err(EvalError::NotFound(format!("directory {rel}")));
        }
        let mut entries: Vec<(String, &str)> = std::fs::read_dir(&dir)
            .map_err(|source| EvalError::Io { path: dir.clone(), source })?
            .filter_map(Result::ok)
            .filter(|e| {
                let name = e.file_name().to_string_lossy().to_string();
                !name.starts_with('.') && !crate::repo::SKIPPED_DIRS.contains(&name.as_str())
            })
            .map(|e| {
                let kind = if e.path().is_dir() { "dir" } else { "file" };
                (e.file_name().to_string_lossy().to_string(), kind)
            })
            .collect();
        entries.sort();
        let entries: Vec<Value> = entries.into_iter().map(|(name, kind)| json!({"name": name, "kind": kind})).collect();
        Ok(json!({"path": self.rel_of(&dir), "entries": entries}))
    }

    fn search_code(&self, pattern: &str, is_regex: bool) -> Result<Value, EvalError> {
        let source = if is_regex { pattern.to_string() } else { regex::escape(pattern) };
        let re = RegexBuilder::new(&source)
            .size_limit(1 << 20)
            .build()
            .map_err(|e| EvalError::InvalidPattern(e.to_string()))?;
        let mut matches = Vec::new();
        let mut truncated = false;
        'files: for file in python_files(self.sandbox.path()) {
            let Ok(text) = std::fs::read_to_string(self.sandbox.path().join(&file)) else {
                continue;
            };
            for (i, line) in text.lines().enumerate() {
                if re.is_match(line) {
                    if matches.len() == SEARCH_HIT_CAP {
                        truncated = true;
                        break 'files;
                    }
                    matches.push(json!({"file": file, "line_no": i + 1, "line": line}));
                }
            }
        }
        let mut out = json!({"matches": matches, "truncated": truncated});
        if truncated {
            out["notice"] = json!(format!("results truncated at {SEARCH_HIT_CAP} matches; refine the pattern"));
        }
        Ok(out)
    }

    fn read_text(&self, rel: &str) -> Result<(PathBuf, String), EvalError> {
        let path = self.resolve(rel)?;
        if !path.is_file() {
            return Err(EvalError::NotFound(format!("file {rel}")));
        }
        let bytes = std::fs::read(&path).map_err(|source| EvalError::Io { path: path.clone(), source })?;
        match String::from_utf8(bytes) {
            Ok(text) if !text.contains('\0') => Ok((path, text)),
            _ => Err(EvalError::NotFound(format!("text file {rel} (binary content)"))),
        }
    }

    fn read_file(&self, rel: &str) -> Result<Value, EvalError> {
        let (path, text) = self.read_text(rel)?;
        let rel = self.rel_of(&path);
        if text.chars().count() <= self.options.read_threshold {
            return Ok(json!({"path": rel, "content": text}));
        }
        let functions = self.unit_index(&rel, &text).unwrap_or_default();
        Ok(json!({
            "path": rel,
            "too_large": true,
            "notice": format!("file exceeds {} characters; read individual units with read_function", self.options.read_threshold),
            "functions": functions,
        }))
    }

    fn unit_index(&self, rel: &str, text: &str) -> Result<Vec<Value>, EvalError> {
        let parsed = python::parse_module(text, rel, &module_name(rel), rel.ends_with("__init__.py"))
            .map_err(|e| EvalError::NotFound(format!("parseable module {rel}: {e}")))?;
        Ok(parsed
            .units
            .iter()
            .map(|u| {
                json!({
                    "unit_id": UnitId::new(rel, &u.qualname).to_string(),
                    "kind": u.kind,
                    "signature": u.signature(text).trim_end(),
                    "line": u.start_line,
                })
            })
            .collect())
    }

    fn list_file_functions(&self, rel: &str) -> Result<Value, EvalError> {
        let (path, text) = self.read_text(rel)?;
        let rel = self.rel_of(&path);
        let functions = self.unit_index(&rel, &text)?;
        Ok(json!({"path": rel, "functions": functions}))
    }

    fn read_function(&self, raw: &str) -> Result<Value, EvalError> {
        let unit = parse_unit_id(raw)?;
        self.resolve(unit.file())?;
        match crate::taskgen::apply::read_unit_source(self.sandbox.path(), &unit) {
            Ok(source) => Ok(json!({"unit_id": unit.to_string(), "source": source})),
            Err(ApplyError::Io { .. }) => Err(EvalError::NotFound(format!("file {}", unit.file()))),
            Err(_) => Err(EvalError::UnknownUnit(unit.to_string())),
        }
    }

    fn submit(&mut self, unit: UnitId, body: String) -> Result<Value, EvalError> {
        self.used_attempts += 1;
        let attempt = self.used_attempts;
        let patch_digest = sha256_hex(format!("{unit}\n{body}"));
        self.edits.entry(unit.clone()).or_default().push(body.clone());

        if let Err(e) = apply_replacement(self.sandbox.path(), &unit, &body) {
            self.last_passed = false;
            self.submissions.push(SubmissionRecord {
                attempt,
                patch_digest,
                failing_count: self.task.failing_tests.len(),
                passed: false,
            });
            self.after_submission();
            let message = match e {
                ApplyError::InvalidReplacement { message, .. } | ApplyError::Unparseable { message, .. } => message,
                other => other.to_string(),
            };
            return Err(EvalError::UnparseableBody(message));
        }

        let (failing, suite) = match run_suite_with(self.sandbox.path(), &self.options.runner) {
            Ok(report) => {
                let suite = match report.exit {
                    SuiteExit::Completed => "completed",
                    SuiteExit::Timeout => "timeout",
                    SuiteExit::Crashed => "crashed",
                };
                (failing_diff(&self.baseline, &report), suite)
            }
            Err(crate::harness::HarnessError::RunnerCrash { .. }) => (self.baseline.passing(), "crashed"),
            Err(e) => {
                return Err(EvalError::Io {
                    path: self.sandbox.path().to_path_buf(),
                    source: std::io::Error::other(e.to_string()),
                })
            }
        };
        let passed = failing.is_empty() && suite == "completed";
        self.last_passed = passed;
        self.submissions.push(SubmissionRecord {
            attempt,
            patch_digest,
            failing_count: failing.len(),
            passed,
        });
        if passed {
            self.passed_at = Some(attempt);
            self.state = SessionState::Solved;
        } else {
            self.after_submission();
        }
        let result = SubmissionResult {
            attempt,
            passed,
            failing_count: failing.len(),
            failing_tests: failing.into_iter().collect(),
            suite: suite.into(),
            remaining_attempts: self.remaining_attempts(),
        };
        Ok(serde_json::to_value(result).expect("submission result serializes"))
    }

    fn after_submission(&mut self) {
        if self.used_attempts >= self.budget.max_attempts && self.state == SessionState::Active {
            self.state = SessionState::Exhausted;
        }
    }

    /// True when some corrupted target differs from its corrupted form.
    pub fn target_modified(&self) -> bool {
        self.task.corruptions.iter().any(|c| {
            crate::taskgen::apply::read_unit_source(self.sandbox.path(), &c.target)
                .map(|now| now != c.corrupted_body)
                .unwrap_or(false)
        })
    }

    /// True when every test file still has its opening digest.
    pub fn tests_untouched(&self) -> bool {
        test_file_digests(self.sandbox.path()) == self.test_digests
    }

    /// Scores and closes the session. Idempotent.
    pub fn close(&mut self, reason: Option<String>) -> Outcome {
        if let Some(o) = &self.outcome {
            return o.clone();
        }
        let mode_ok = match self.task.mode {
            TaskMode::Remove => true,
            TaskMode::Discovery => self.target_modified(),
        };
        let score = u8::from(self.last_passed && mode_ok && self.tests_untouched());
        if self.state == SessionState::Active {
            self.state = SessionState::Failed;
        }
        let outcome = Outcome {
            score,
            solved_at_attempt: if score == 1 { self.passed_at } else { None },
            used_tools: self.used_tools,
            used_attempts: self.used_attempts,
            state: self.state,
            session_id: self.id.clone(),
            task_id: self.task.task_id.clone(),
            mode: self.task.mode,
            agent: self.options.agent.clone(),
            budget: self.budget,
            submissions: self.submissions.clone(),
            reason,
        };
        self.outcome = Some(outcome.clone());
        outcome
    }

    /// Closes the session and returns its full trajectory.
    pub fn finish(&mut self, reason: Option<String>) -> Trajectory {
        let outcome = self.close(reason);
        Trajectory {
            events: self.events.clone(),
            outcome,
            calls: Vec::new(),
        }
    }
}
