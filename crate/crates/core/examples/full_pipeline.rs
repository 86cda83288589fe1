//! Generates, validates, evaluates and reports on the bundled fixture
//! repository in a temporary store.
//!
//! Usage: `cargo run --example full_pipeline -- [max_targets] [store_dir]`

use std::path::PathBuf;

use faultline::pipeline::{
    cmd_evaluate, cmd_generate, cmd_report, cmd_validate, AgentSpec, GenerationMode, PipelineConfig, TaskFilter,
};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let max_targets: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(6);
    let keep = args.next().map(PathBuf::from);
    let temp = tempfile::tempdir()?;
    let store = keep.unwrap_or_else(|| temp.path().to_path_buf());

    let mut config = PipelineConfig::default();
    config.seed = 11;
    config.store = store.clone();
    config.repo.root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/inventory_repo");
    config.generation.modes = vec![GenerationMode::Remove, GenerationMode::Discovery, GenerationMode::Multifunction];
    config.generation.max_targets = max_targets;
    config.generation.sets_per_k = 2;

    let started = std::time::Instant::now();
    let generated = cmd_generate(&config)?;
    println!("generated {} tasks in {:.1?}", generated.task_ids.len(), started.elapsed());
    println!("{}", serde_json::to_string_pretty(&generated)?);
    let validated = cmd_validate(&config)?;
    println!("re-validated {}/{} tasks", validated.reproduced, validated.checked);
    for spec in [AgentSpec::Oracle, AgentSpec::Null, AgentSpec::Competence(1)] {
        let s = cmd_evaluate(&config, &spec, &TaskFilter::default(), false)?;
        println!("{}: solved {}/{}", s.label, s.solved, s.tasks);
    }
    let report = cmd_report(&config)?;
    println!("report files under {}: {}", store.join("report").display(), report.files.len());
    println!("total {:.1?}", started.elapsed());
    Ok(())
}
