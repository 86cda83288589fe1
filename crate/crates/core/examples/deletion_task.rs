//! Delete one function body and check that the result is a valid task.
//!
//! Usage: `cargo run --example deletion_task [unit_id]`

use std::path::PathBuf;

use faultline::harness::{baseline_with, RunnerConfig, DEFAULT_TEST_COMMAND};
use faultline::repo::ingest_repository;
use faultline::taskgen::{delete_function, validate_task, ValidationConfig};

fn main() -> anyhow::Result<()> {
    let target = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "inventory/checksum.py::checksum".into());
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/inventory_repo");
    let repo = ingest_repository(&root, DEFAULT_TEST_COMMAND)?;
    let baseline = baseline_with(&root, &RunnerConfig::default())?;
    println!("baseline: {} tests pass", baseline.outcomes.len());

    let corruption = delete_function(&repo, &target)?;
    println!("corrupted body:\n{}", corruption.corrupted_body);
    let v = validate_task(&root, &baseline, std::slice::from_ref(&corruption), &ValidationConfig::default())?;
    println!("accepted: {}  reason: {:?}", v.accepted, v.reason);
    for t in &v.failing_tests {
        println!("  fails: {t}");
    }
    Ok(())
}
