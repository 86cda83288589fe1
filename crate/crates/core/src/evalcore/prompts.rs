//! Solver prompts, task statements and tool schemas.

use serde_json::json;

use super::agent::ToolSpec;
use super::BudgetConfig;
use crate::taskgen::{TaskInstance, TaskMode};

/// Remove-mode system prompt template (leading `#` lines are metadata).
pub const SOLVER_REMOVE_TEMPLATE: &str = include_str!("../../templates/solver_remove.txt");
/// Discovery-mode system prompt template (leading `#` lines are metadata).
pub const SOLVER_DISCOVERY_TEMPLATE: &str = include_str!("../../templates/solver_discovery.txt");

fn strip_header(template: &str) -> String {
    template
        .lines()
        .skip_while(|l| l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

pub fn render_system_prompt(mode: TaskMode, budget: BudgetConfig) -> String {
    let template = match mode {
        TaskMode::Remove => SOLVER_REMOVE_TEMPLATE,
        TaskMode::Discovery => SOLVER_DISCOVERY_TEMPLATE,
    };
    strip_header(template)
        .replace("{max_tool_uses}", &budget.max_tool_uses.to_string())
        .replace("{max_attempts}", &budget.max_attempts.to_string())
}

/// Solver-facing task statement. Discovery mode names only failing tests.
pub fn task_description(task: &TaskInstance) -> String {
    let mut out = match task.mode {
        TaskMode::Remove => {
            let target = &task.corruptions[0].target;
            format!(
                "The implementation of `{}` (unit id `{target}`, file `{}`) has been removed.\n\
                 Restore it with submit_attempt.\n",
                target.qualname(),
                target.file()
            )
        }
        TaskMode::Discovery => "Code in this repository has been corrupted. Locate and repair it with replace_function.\n".to_string(),
    };
    out.push_str(&format!("\n{} previously passing tests now fail:\n", task.failing_tests.len()));
    for t in &task.failing_tests {
        out.push_str(&format!("- {t}\n"));
    }
    out
}

pub fn tool_names(mode: TaskMode) -> Vec<&'static str> {
    let mut names = super::INFO_TOOLS.to_vec();
    names.push(match mode {
        TaskMode::Remove => "submit_attempt",
        TaskMode::Discovery => "replace_function",
    });
    names
}

/// Tool schemas for `mode`.
pub fn tool_specs(mode: TaskMode) -> Vec<ToolSpec> {
    let path = json!({"type": "object", "properties": {"path": {"type": "string"}}, "required": ["path"]});
    let unit = json!({"type": "object", "properties": {"unit_id": {"type": "string"}}, "required": ["unit_id"]});
    let mut specs = vec![
        ToolSpec::new("list_directory", "List files and directories at a path relative to the repository root.", path.clone()),
        ToolSpec::new(
            "search_code",
            "Search all Python files for a literal string or, with is_regex, a regular expression.",
            json!({"type": "object", "properties": {"pattern": {"type": "string"}, "is_regex": {"type": "boolean"}}, "required": ["pattern"]}),
        ),
        ToolSpec::new("read_file", "Read a file. Large files return an index of their functions instead.", path.clone()),
        ToolSpec::new("list_file_functions", "List the functions, classes and methods defined in a file.", path),
        ToolSpec::new("read_function", "Read the current source of a unit given its id `file.py::Qualified.name`.", unit),
    ];
    specs.push(match mode {
        TaskMode::Remove => ToolSpec::new(
            "submit_attempt",
            "Submit a full definition of the target function; runs the test suite.",
            json!({"type": "object", "properties": {"body": {"type": "string"}, "unit_id": {"type": "string"}}, "required": ["body"]}),
        ),
        TaskMode::Discovery => ToolSpec::new(
            "replace_function",
            "Persistently replace a unit's full definition; runs the test suite.",
            json!({"type": "object", "properties": {"unit_id": {"type": "string"}, "body": {"type": "string"}}, "required": ["unit_id", "body"]}),
        ),
    });
    specs
}
