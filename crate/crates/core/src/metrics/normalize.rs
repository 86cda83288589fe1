//! Dataset-level standardization and correlation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{MetricsError, MetricsRecord, METRIC_NAMES};
use crate::repo::UnitId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedMetrics {
    pub unit: UnitId,
    pub zscores: BTreeMap<String, f64>,
    pub percentiles: BTreeMap<String, f64>,
}

impl NormalizedMetrics {
    pub fn z(&self, metric: &str) -> Option<f64> {
        self.zscores.get(metric).copied()
    }

    pub fn percentile(&self, metric: &str) -> Option<f64> {
        self.percentiles.get(metric).copied()
    }
}

/// Population z-scores; all zero when the values are constant.
pub fn zscores(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd == 0.0 || !sd.is_finite() {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - mean) / sd).collect()
}

/// Fraction of values strictly below each value (ties share the lower rank).
pub fn percentile_ranks(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values
        .iter()
        .map(|v| sorted.partition_point(|s| s < v) as f64 / n)
        .collect()
}

pub fn normalize(records: &[MetricsRecord]) -> Result<Vec<NormalizedMetrics>, MetricsError> {
    if records.len() < 2 {
        return Err(MetricsError::TooFewRecords {
            needed: 2,
            got: records.len(),
        });
    }
    let columns: Vec<Vec<f64>> = (0..METRIC_NAMES.len())
        .map(|m| records.iter().map(|r| r.values()[m]).collect())
        .collect();
    let z: Vec<Vec<f64>> = columns.iter().map(|c| zscores(c)).collect();
    let p: Vec<Vec<f64>> = columns.iter().map(|c| percentile_ranks(c)).collect();
    Ok(records
        .iter()
        .enumerate()
        .map(|(i, r)| NormalizedMetrics {
            unit: r.unit.clone(),
            zscores: METRIC_NAMES.iter().enumerate().map(|(m, name)| (name.to_string(), z[m][i])).collect(),
            percentiles: METRIC_NAMES.iter().enumerate().map(|(m, name)| (name.to_string(), p[m][i])).collect(),
        })
        .collect())
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    /// `None` marks a metric with zero variance.
    pub values: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        self.values[i][j]
    }
}

pub fn correlation_matrix(records: &[MetricsRecord]) -> Result<CorrelationMatrix, MetricsError> {
    if records.len() < 3 {
        return Err(MetricsError::TooFewRecords {
            needed: 3,
            got: records.len(),
        });
    }
    let columns: Vec<Vec<f64>> = (0..METRIC_NAMES.len())
        .map(|m| records.iter().map(|r| r.values()[m]).collect())
        .collect();
    let k = columns.len();
    let mut values = vec![vec![None; k]; k];
    for i in 0..k {
        for j in i..k {
            let r = if i == j {
                pearson(&columns[i], &columns[i]).map(|_| 1.0)
            } else {
                pearson(&columns[i], &columns[j])
            };
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        names: METRIC_NAMES.iter().map(|s| s.to_string()).collect(),
        values,
    })
}
