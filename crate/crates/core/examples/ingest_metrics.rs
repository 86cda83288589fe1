//! Parse a Python repository, build its call graph and print per-unit metrics.
//!
//! Usage: `cargo run --example ingest_metrics [repo_root]`

use std::path::PathBuf;

use faultline::callgraph::build_call_graph;
use faultline::harness::DEFAULT_TEST_COMMAND;
use faultline::metrics::{compute_metrics, correlation_matrix, CentralityConfig};
use faultline::repo::ingest_repository;

fn main() -> anyhow::Result<()> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/inventory_repo"));
    let repo = ingest_repository(&root, DEFAULT_TEST_COMMAND)?;
    let graph = build_call_graph(&repo);
    println!("{} units, {} call edges", graph.len(), graph.edge_count());

    let mut records = compute_metrics(&repo, &graph, &CentralityConfig::default())?;
    records.sort_by(|a, b| b.pagerank.total_cmp(&a.pagerank));
    println!("{:<48} {:>4} {:>3} {:>8} {:>8} {:>8}", "unit", "loc", "cc", "volume", "pagerank", "harmonic");
    for r in records.iter().take(10) {
        println!(
            "{:<48} {:>4} {:>3} {:>8.1} {:>8.4} {:>8.3}",
            r.unit.as_str(),
            r.loc,
            r.cyclomatic,
            r.halstead_volume,
            r.pagerank,
            r.harmonic
        );
    }
    let corr = correlation_matrix(&records)?;
    println!("corr(loc, cyclomatic) = {:.3}", corr.get("loc", "cyclomatic").unwrap_or(f64::NAN));
    println!("corr(loc, harmonic)   = {:.3}", corr.get("loc", "harmonic").unwrap_or(f64::NAN));
    Ok(())
}
