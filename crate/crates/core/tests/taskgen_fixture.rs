mod common;

use std::collections::HashMap;

use common::{fixture_root, tree_digest};
use faultline::harness::{baseline_with, run_suite_with, RunnerConfig, Sandbox, SuiteReport};
use faultline::repo::{ingest_repository, Repository, UnitId};
use faultline::taskgen::{
    adversarial_corrupt, apply_corruptions, apply_replacement, delete_function, relevant_tests, validate_task,
    AdversarialConfig, MutationCorruptor, RejectReason, ReplayCorruptor, TaskgenError, ValidationConfig,
};

fn setup() -> (Repository, SuiteReport) {
    let root = fixture_root();
    let repo = ingest_repository(&root, faultline::harness::DEFAULT_TEST_COMMAND).unwrap();
    let baseline = baseline_with(&root, &RunnerConfig::default()).unwrap();
    (repo, baseline)
}

#[test]
fn deleting_checksum_fails_its_dependents_and_revalidates() {
    let (repo, baseline) = setup();
    let before = tree_digest(&repo.root);
    let c = delete_function(&repo, "inventory/checksum.py::checksum").unwrap();
    let config = ValidationConfig::default();
    let first = validate_task(&repo.root, &baseline, std::slice::from_ref(&c), &config).unwrap();
    assert!(first.accepted);
    assert_eq!(first.failing_tests.len(), 10);
    assert!(first.failing_tests.contains("tests.test_checksum::test_checksum_known_value"));
    let second = validate_task(&repo.root, &baseline, std::slice::from_ref(&c), &config).unwrap();
    assert_eq!(first.failing_tests, second.failing_tests);
    assert_eq!(tree_digest(&repo.root), before);
}

#[test]
fn small_blast_radius_is_rejected() {
    let (repo, baseline) = setup();
    let c = delete_function(&repo, "inventory/parsing.py::parse_value").unwrap();
    let v = validate_task(&repo.root, &baseline, &[c], &ValidationConfig::default()).unwrap();
    assert!(!v.accepted);
    assert_eq!(v.reason, Some(RejectReason::TooFewFailures));
    assert_eq!(v.failing_tests.len(), 3);
}

#[test]
fn hanging_corruption_times_out() {
    let (repo, baseline) = setup();
    let unit = repo.unit("inventory/mathutil.py::mean").unwrap();
    let mut c = delete_function(&repo, unit.id.as_str()).unwrap();
    c.corrupted_body = c.corrupted_body.replace("raise NotImplementedError", "while True:\n        pass");
    let config = ValidationConfig {
        min_failing: 5,
        runner: RunnerConfig::new(faultline::harness::DEFAULT_TEST_COMMAND, 3.0),
    };
    let v = validate_task(&repo.root, &baseline, &[c], &config).unwrap();
    assert_eq!(v.reason, Some(RejectReason::Timeout));
}

#[test]
fn restoring_originals_passes_the_suite() {
    let (repo, _) = setup();
    let targets = ["inventory/checksum.py::checksum", "inventory/records.py::Inventory.add"];
    let corruptions: Vec<_> = targets.iter().map(|t| delete_function(&repo, t).unwrap()).collect();
    let sandbox = Sandbox::create(&repo.root).unwrap();
    apply_corruptions(sandbox.path(), &corruptions).unwrap();
    for c in &corruptions {
        let original = repo.unit(c.target.as_str()).unwrap();
        assert_eq!(original.digest(), c.original_digest);
        apply_replacement(sandbox.path(), &c.target, &original.source()).unwrap();
    }
    let report = run_suite_with(sandbox.path(), &RunnerConfig::default()).unwrap();
    assert!(report.failing().is_empty());
    assert_eq!(tree_digest(sandbox.path()), tree_digest(&repo.root));
}

fn replay(target: &str, candidates: &[String]) -> ReplayCorruptor {
    ReplayCorruptor::new(HashMap::from([(UnitId::from(target), candidates.to_vec())]))
}

#[test]
fn adversarial_guards() {
    let (repo, baseline) = setup();
    let target = "inventory/checksum.py::checksum";
    let original = repo.unit(target).unwrap().source();
    let off_by_one = original.replace("a, b = 1, 0", "a, b = 2, 0");
    let renamed = original.replace("def checksum(data):", "def checksum(data, seed=1):");
    let config = AdversarialConfig::default();

    let c = adversarial_corrupt(&repo, &baseline, target, &replay(target, std::slice::from_ref(&off_by_one)), &config).unwrap();
    assert_eq!(c.corrupted_body, off_by_one);

    for bad in [renamed, original.clone()] {
        match adversarial_corrupt(&repo, &baseline, target, &replay(target, &[bad]), &config) {
            Err(TaskgenError::NoValidCorruption { attempts, .. }) => assert_eq!(attempts, 1),
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    // the last qualifying candidate wins; non-qualifying ones in between are skipped
    let other = original.replace("b << 16", "b << 15");
    let script = [off_by_one, original.clone(), other.clone()];
    let c = adversarial_corrupt(&repo, &baseline, target, &replay(target, &script), &config).unwrap();
    assert_eq!(c.corrupted_body, other);
}

#[test]
fn mutation_corruptor_finds_a_qualifying_mutant() {
    let (repo, baseline) = setup();
    let target = "inventory/units.py::convert";
    let config = AdversarialConfig::default();
    let a = adversarial_corrupt(&repo, &baseline, target, &MutationCorruptor::new(7), &config).unwrap();
    let b = adversarial_corrupt(&repo, &baseline, target, &MutationCorruptor::new(7), &config).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.corrupted_body, repo.unit(target).unwrap().source());
    assert!(!a.corrupted_body.contains('#') || repo.unit(target).unwrap().source().contains('#'));
}

#[test]
fn relevant_tests_follow_imports() {
    let (repo, _) = setup();
    let excerpts = relevant_tests(&repo, &UnitId::from("inventory/checksum.py::checksum"), 5);
    assert_eq!(excerpts.len(), 5);
    assert!(excerpts[0].starts_with("# tests/test_checksum.py\ndef test_"));
    assert!(excerpts.iter().all(|e| e.contains("checksum")));
}
