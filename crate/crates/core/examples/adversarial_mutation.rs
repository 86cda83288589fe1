//! Run the submit-and-observe corruption loop with the built-in mutation
//! client and show each round's feedback.
//!
//! Usage: `cargo run --example adversarial_mutation [unit_id] [seed]`

use std::path::PathBuf;

use faultline::harness::{baseline_with, RunnerConfig, DEFAULT_TEST_COMMAND};
use faultline::repo::ingest_repository;
use faultline::taskgen::{adversarial_corrupt_detailed, AdversarialConfig, MutationCorruptor};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let target = args.next().unwrap_or_else(|| "inventory/mathutil.py::_clamp".into());
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(11);
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/inventory_repo");
    let repo = ingest_repository(&root, DEFAULT_TEST_COMMAND)?;
    let baseline = baseline_with(&root, &RunnerConfig::default())?;

    let config = AdversarialConfig::default();
    let client = MutationCorruptor::with_goal(seed, 5);
    match adversarial_corrupt_detailed(&repo, &baseline, &target, &client, &config) {
        Ok(outcome) => {
            for (i, f) in outcome.history.iter().enumerate() {
                println!("round {}: valid={} qualifies={} failing={} {}", i + 1, f.valid, f.qualifies, f.failing_tests.len(), f.message);
            }
            println!("accepted corruption:\n{}", outcome.corruption.corrupted_body);
            println!("breaks {} test(s)", outcome.failing_tests.len());
        }
        Err(e) => println!("no corruption found: {e}"),
    }
    Ok(())
}
