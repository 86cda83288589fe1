pub mod analysis;
pub mod callgraph;
pub mod digest;
pub mod evalcore;
pub mod harness;
#[cfg(feature = "live-llm")]
pub mod llm;
pub mod metrics;
pub mod pipeline;
pub mod python;
pub mod repo;
pub mod taskgen;
