//! Run the oracle, null and competence-graded agents on a two-function task
//! and print each trajectory.
//!
//! Usage: `cargo run --example agent_runs`

use std::path::PathBuf;

use faultline::evalcore::{
    run_agent, AgentClient, BudgetConfig, CompetenceGradedAgent, NullAgent, OracleAgent, SessionOptions,
};
use faultline::harness::{baseline_with, RunnerConfig, DEFAULT_TEST_COMMAND};
use faultline::repo::ingest_repository;
use faultline::taskgen::{delete_function, task_id, validate_task, GeneratorInfo, RepoRef, TaskInstance, TaskMode, ValidationConfig};

fn main() -> anyhow::Result<()> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/inventory_repo");
    let repo = ingest_repository(&root, DEFAULT_TEST_COMMAND)?;
    let baseline = baseline_with(&root, &RunnerConfig::default())?;
    let corruptions = vec![
        delete_function(&repo, "inventory/checksum.py::checksum")?,
        delete_function(&repo, "inventory/mathutil.py::_clamp")?,
    ];
    let v = validate_task(&root, &baseline, &corruptions, &ValidationConfig::default())?;
    let task = TaskInstance {
        task_id: task_id(&repo.commit, TaskMode::Remove, &corruptions),
        repo_ref: RepoRef {
            source: root.display().to_string(),
            commit: repo.commit.clone(),
        },
        mode: TaskMode::Remove,
        corruptions,
        failing_tests: v.failing_tests.into_iter().collect(),
        metrics: Default::default(),
        generator: GeneratorInfo {
            version: env!("CARGO_PKG_VERSION").into(),
            seed: 0,
        },
    };
    println!("task {} breaks {} tests", task.task_id, task.failing_tests.len());

    let agents: Vec<Box<dyn AgentClient>> = vec![
        Box::new(OracleAgent::new(&task, &root)?),
        Box::new(CompetenceGradedAgent::new(&task, &root, 1)?),
        Box::new(NullAgent),
    ];
    for mut agent in agents {
        let label = agent.label();
        let options = SessionOptions {
            agent: label.clone(),
            ..SessionOptions::default()
        };
        let t = run_agent(&task, &root, &baseline, BudgetConfig::default(), agent.as_mut(), options)?;
        println!("\n{label}: score {} ({} info calls, {} submissions)", t.outcome.score, t.info_calls(), t.submissions());
        print!("{}", t.to_jsonl());
    }
    Ok(())
}
