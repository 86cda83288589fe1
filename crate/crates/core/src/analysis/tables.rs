//! Result rows, scaling curves, telemetry and difficulty grids.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::logistic::LogisticFit;
use super::stats::quantile;
use super::AnalysisError;
use crate::evalcore::{Trajectory, INFO_TOOLS, SUBMIT_TOOLS};
use crate::taskgen::TaskMode;

/// One (task, agent) evaluation with its predictors and telemetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub task_id: String,
    pub label: String,
    pub mode: TaskMode,
    pub score: u8,
    pub solved_at_attempt: Option<usize>,
    /// Maximum over targets of the z-scored complexity metric.
    pub complexity_z: f64,
    /// Maximum over targets of the z-scored centrality metric.
    pub centrality_z: f64,
    pub corruption_count: usize,
    pub info_calls: usize,
    pub submissions: usize,
    pub tool_counts: BTreeMap<String, usize>,
}

/// Tool columns in a fixed order.
pub fn all_tools() -> Vec<&'static str> {
    INFO_TOOLS.iter().chain(SUBMIT_TOOLS.iter()).copied().collect()
}

/// Entry n-1 is the fraction of trajectories solved by submission n.
pub fn passn_curve(trajectories: &[Trajectory]) -> Vec<f64> {
    let len = trajectories.iter().map(|t| t.outcome.budget.max_attempts).max().unwrap_or(0);
    let total = trajectories.len() as f64;
    (1..=len)
        .map(|n| {
            let solved = trajectories
                .iter()
                .filter(|t| t.outcome.solved_at_attempt.is_some_and(|a| a <= n))
                .count();
            solved as f64 / total
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRow {
    pub label: String,
    pub mode: TaskMode,
    pub trajectories: usize,
    pub mean_info_calls: f64,
    pub mean_submissions: f64,
    pub success_rate: f64,
    /// Mean charged calls per tool.
    pub tool_means: BTreeMap<String, f64>,
}

/// Means per (agent label, mode).
pub fn telemetry_summary(trajectories: &[Trajectory]) -> Vec<TelemetryRow> {
    let mut groups: BTreeMap<(String, TaskMode), Vec<&Trajectory>> = BTreeMap::new();
    for t in trajectories {
        groups.entry((t.outcome.agent.clone(), t.outcome.mode)).or_default().push(t);
    }
    groups
        .into_iter()
        .map(|((label, mode), ts)| {
            let n = ts.len() as f64;
            let mean = |f: &dyn Fn(&Trajectory) -> f64| ts.iter().map(|t| f(t)).sum::<f64>() / n;
            let tool_means = all_tools()
                .into_iter()
                .map(|tool| {
                    let m = mean(&|t| t.tool_counts().get(tool).copied().unwrap_or(0) as f64);
                    (tool.to_string(), m)
                })
                .collect();
            TelemetryRow {
                label,
                mode,
                trajectories: ts.len(),
                mean_info_calls: mean(&|t| t.info_calls() as f64),
                mean_submissions: mean(&|t| t.submissions() as f64),
                success_rate: mean(&|t| f64::from(t.outcome.score)),
                tool_means,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub x_center: f64,
    pub y_center: f64,
    pub count: usize,
    pub successes: usize,
    /// None for empty cells.
    pub rate: Option<f64>,
}

/// The line a*x + b*y = c on which the fitted logit equals `logit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLine {
    pub level: String,
    pub logit: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyGrid {
    pub cells: Vec<GridCell>,
    pub lines: Vec<BoundaryLine>,
}

fn edges(values: impl Iterator<Item = f64>, bins: usize) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi <= lo {
        (lo - 0.5, 1.0 / bins as f64)
    } else {
        (lo, (hi - lo) / bins as f64)
    }
}

fn bin_of(v: f64, lo: f64, width: f64, bins: usize) -> usize {
    (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1)
}

/// Square-binned success rates over (x, y), plus boundary lines from a fit
/// whose first two predictors are x and y: the zero-logit line and the
/// lines at the 75th and 95th percentiles of predicted difficulty
/// (1 - predicted success) over the points.
pub fn difficulty_grid(
    points: &[(f64, f64, bool)],
    bins: usize,
    fit: Option<&LogisticFit>,
) -> Result<DifficultyGrid, AnalysisError> {
    if bins == 0 || points.is_empty() {
        return Err(AnalysisError::EmptySample { needed: 1, got: 0 });
    }
    let (x0, xw) = edges(points.iter().map(|p| p.0), bins);
    let (y0, yw) = edges(points.iter().map(|p| p.1), bins);
    let mut counts = vec![(0usize, 0usize); bins * bins];
    for &(x, y, ok) in points {
        let cell = &mut counts[bin_of(y, y0, yw, bins) * bins + bin_of(x, x0, xw, bins)];
        cell.0 += 1;
        cell.1 += usize::from(ok);
    }
    let cells = counts
        .iter()
        .enumerate()
        .map(|(i, &(count, successes))| GridCell {
            x_center: x0 + xw * ((i % bins) as f64 + 0.5),
            y_center: y0 + yw * ((i / bins) as f64 + 0.5),
            count,
            successes,
            rate: (count > 0).then(|| successes as f64 / count as f64),
        })
        .collect();

    let mut lines = Vec::new();
    if let Some(fit) = fit.filter(|f| f.coefficients.len() >= 3) {
        let (b0, bx, by) = (
            fit.coefficients[0].estimate,
            fit.coefficients[1].estimate,
            fit.coefficients[2].estimate,
        );
        let mut difficulty: Vec<f64> = points
            .iter()
            .map(|&(x, y, _)| 1.0 - 1.0 / (1.0 + (-(b0 + bx * x + by * y)).exp()))
            .collect();
        difficulty.sort_by(f64::total_cmp);
        let mut levels = vec![("zero_logit".to_string(), 0.0)];
        for (name, q) in [("difficulty_p75", 0.75), ("difficulty_p95", 0.95)] {
            let d = quantile(&difficulty, q).clamp(1e-12, 1.0 - 1e-12);
            levels.push((name.to_string(), ((1.0 - d) / d).ln()));
        }
        for (level, logit) in levels {
            lines.push(BoundaryLine {
                level,
                logit,
                a: bx,
                b: by,
                c: logit - b0,
            });
        }
    }
    Ok(DifficultyGrid { cells, lines })
}
