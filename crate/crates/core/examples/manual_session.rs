//! Drive a budgeted tool session by hand: explore, submit a fix, close.
//!
//! Usage: `cargo run --example manual_session`

use std::path::PathBuf;

use serde_json::json;

use faultline::evalcore::{open_session, BudgetConfig, SessionOptions};
use faultline::harness::{baseline_with, RunnerConfig, DEFAULT_TEST_COMMAND};
use faultline::repo::ingest_repository;
use faultline::taskgen::{delete_function, task_id, validate_task, GeneratorInfo, RepoRef, TaskInstance, TaskMode, ValidationConfig};

const TARGET: &str = "inventory/checksum.py::checksum";

fn main() -> anyhow::Result<()> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/inventory_repo");
    let repo = ingest_repository(&root, DEFAULT_TEST_COMMAND)?;
    let baseline = baseline_with(&root, &RunnerConfig::default())?;
    let corruption = delete_function(&repo, TARGET)?;
    let v = validate_task(&root, &baseline, std::slice::from_ref(&corruption), &ValidationConfig::default())?;
    let task = TaskInstance {
        task_id: task_id(&repo.commit, TaskMode::Remove, std::slice::from_ref(&corruption)),
        repo_ref: RepoRef {
            source: root.display().to_string(),
            commit: repo.commit.clone(),
        },
        mode: TaskMode::Remove,
        corruptions: vec![corruption],
        failing_tests: v.failing_tests.into_iter().collect(),
        metrics: Default::default(),
        generator: GeneratorInfo {
            version: env!("CARGO_PKG_VERSION").into(),
            seed: 0,
        },
    };

    let mut session = open_session(&task, &root, &baseline, BudgetConfig::preset("small")?, SessionOptions::default())?;
    println!("{}\n", session.description());
    let calls = [
        ("list_directory", json!({"path": "inventory"})),
        ("search_code", json!({"pattern": "checksum("})),
        ("read_function", json!({"unit_id": TARGET})),
    ];
    for (tool, args) in calls {
        let result = session.invoke(tool, &args)?;
        let text = result.to_string();
        println!("{tool}: {}", &text[..text.len().min(160)]);
        println!("  tools left: {}", session.remaining_tools());
    }
    let wrong = session.invoke("submit_attempt", &json!({"body": "def checksum(data):\n    return 0\n"}))?;
    println!("wrong fix: passed={} failing={}", wrong["passed"], wrong["failing_tests"].as_array().map_or(0, Vec::len));
    let right = session.invoke("submit_attempt", &json!({"body": repo.unit(TARGET).unwrap().source()}))?;
    println!("restored: passed={}", right["passed"]);
    let outcome = session.close(None);
    println!("score {} after {} tool uses and {} attempts", outcome.score, outcome.used_tools, outcome.used_attempts);
    Ok(())
}
