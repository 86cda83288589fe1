//! Per-unit complexity and centrality metrics and their dataset tables.

pub mod centrality;
pub mod complexity;
pub mod normalize;

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use centrality::{CentralityConfig, CentralityError, Degrees};
pub use complexity::{Complexity, HalsteadCounts};
pub use normalize::{correlation_matrix, normalize, CorrelationMatrix, NormalizedMetrics};

use crate::callgraph::CallGraph;
use crate::python::SyntaxError;
use crate::repo::{Repository, UnitId, UnitKind};

/// Metric columns, in `metrics.csv` order after `unit,kind`.
pub const METRIC_NAMES: [&str; 12] = [
    "loc",
    "cyclomatic",
    "halstead_difficulty",
    "halstead_volume",
    "nesting_depth",
    "in_degree",
    "out_degree",
    "total_degree",
    "pagerank",
    "harmonic",
    "distance_discount",
    "betweenness",
];

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error(transparent)]
    Centrality(#[from] CentralityError),
    #[error("unit {unit} does not parse: {source}")]
    Syntax {
        unit: UnitId,
        #[source]
        source: SyntaxError,
    },
    #[error("need at least {needed} records, got {got}")]
    TooFewRecords { needed: usize, got: usize },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub unit: UnitId,
    pub kind: UnitKind,
    pub loc: usize,
    pub cyclomatic: usize,
    pub halstead_difficulty: f64,
    pub halstead_volume: f64,
    pub nesting_depth: usize,
    pub in_degree: usize,
    pub out_degree: usize,
    pub total_degree: usize,
    pub pagerank: f64,
    pub harmonic: f64,
    pub distance_discount: f64,
    pub betweenness: f64,
}

impl MetricsRecord {
    pub fn values(&self) -> [f64; 12] {
        [
            self.loc as f64,
            self.cyclomatic as f64,
            self.halstead_difficulty,
            self.halstead_volume,
            self.nesting_depth as f64,
            self.in_degree as f64,
            self.out_degree as f64,
            self.total_degree as f64,
            self.pagerank,
            self.harmonic,
            self.distance_discount,
            self.betweenness,
        ]
    }

    pub fn get(&self, metric: &str) -> Option<f64> {
        METRIC_NAMES.iter().position(|m| *m == metric).map(|i| self.values()[i])
    }
}

/// Computes one record per graph node (all repository units), in id order.
pub fn compute_metrics(
    repo: &Repository,
    graph: &CallGraph,
    config: &CentralityConfig,
) -> Result<Vec<MetricsRecord>, MetricsError> {
    let central = centrality::all_centralities(graph, config)?;
    repo.units
        .par_iter()
        .map(|unit| {
            let i = graph
                .index_of(unit.id.as_str())
                .map_err(CentralityError::from)?;
            let c = Complexity::of_unit(unit).map_err(|source| MetricsError::Syntax {
                unit: unit.id.clone(),
                source,
            })?;
            let n = &central[i];
            Ok(MetricsRecord {
                unit: unit.id.clone(),
                kind: unit.kind,
                loc: c.loc,
                cyclomatic: c.cyclomatic,
                halstead_difficulty: c.halstead.difficulty(),
                halstead_volume: c.halstead.volume(),
                nesting_depth: c.nesting_depth,
                in_degree: n.degrees.in_degree,
                out_degree: n.degrees.out_degree,
                total_degree: n.degrees.total,
                pagerank: n.pagerank,
                harmonic: n.harmonic,
                distance_discount: n.distance_discount,
                betweenness: n.betweenness,
            })
        })
        .collect()
}

pub fn write_metrics_csv(records: &[MetricsRecord], path: &Path) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRecord>, MetricsError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// `correlations.csv`: a square table with `NA` for zero-variance metrics.
pub fn write_correlations_csv(matrix: &CorrelationMatrix, path: &Path) -> Result<(), MetricsError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "metric,{}", matrix.names.join(","))?;
    for (name, row) in matrix.names.iter().zip(&matrix.values) {
        let cells: Vec<String> = row
            .iter()
            .map(|v| v.map(|x| x.to_string()).unwrap_or_else(|| "NA".into()))
            .collect();
        writeln!(out, "{name},{}", cells.join(","))?;
    }
    out.flush()?;
    Ok(())
}
