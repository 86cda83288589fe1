//! `report`: tables and fits over stored trajectories.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::{io_error, write_json, PipelineError, Store};
use crate::analysis::{
    all_tools, bootstrap_mean_ci, cohens_d, difficulty_grid, fit_logistic, mann_whitney, passn_curve,
    telemetry_summary, LogisticFit, ResultRow,
};
use crate::evalcore::trajectory::TRAJECTORY_FILE;
use crate::evalcore::{read_trajectory, Trajectory};
use crate::taskgen::{select_hard_set, TaskInstance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub labels: Vec<String>,
    pub rows: usize,
    pub hard_set: Vec<String>,
    pub files: Vec<PathBuf>,
}

fn max_z(task: &TaskInstance, metric: &str) -> f64 {
    task.metrics
        .values()
        .filter_map(|m| m.normalized.z(metric))
        .reduce(f64::max)
        .unwrap_or(0.0)
}

/// Joins trajectories with their tasks; trajectories of unknown tasks are skipped.
pub fn result_rows(
    tasks: &[TaskInstance],
    trajectories: &[Trajectory],
    complexity_metric: &str,
    centrality_metric: &str,
) -> Vec<ResultRow> {
    let by_id: HashMap<&str, &TaskInstance> = tasks.iter().map(|t| (t.task_id.as_str(), t)).collect();
    trajectories
        .iter()
        .filter_map(|tr| {
            let task = by_id.get(tr.outcome.task_id.as_str())?;
            Some(ResultRow {
                task_id: task.task_id.clone(),
                label: tr.outcome.agent.clone(),
                mode: task.mode,
                score: tr.outcome.score,
                solved_at_attempt: tr.outcome.solved_at_attempt,
                complexity_z: max_z(task, complexity_metric),
                centrality_z: max_z(task, centrality_metric),
                corruption_count: task.corruptions.len(),
                info_calls: tr.info_calls(),
                submissions: tr.submissions(),
                tool_counts: tr.tool_counts(),
            })
        })
        .collect()
}

/// Every trajectory in the store, ordered by label directory then task id.
pub fn load_trajectories(store: &Store) -> Result<Vec<Trajectory>, PipelineError> {
    let root = store.trajectories_dir();
    let mut out = Vec::new();
    if !root.is_dir() {
        return Ok(out);
    }
    for label in sorted_dirs(&root)? {
        for task in sorted_dirs(&label)? {
            if task.join(TRAJECTORY_FILE).is_file() {
                out.push(read_trajectory(&task)?);
            }
        }
    }
    Ok(out)
}

fn sorted_dirs(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_error(dir))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    Ok(dirs)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, PipelineError> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> PipelineError {
    PipelineError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// Key in `fit.json` of the fit over every label's rows.
pub const POOLED_LABEL: &str = "all";

/// Fit or the reason it could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitResult {
    Fit(LogisticFit),
    Error(String),
}

/// Logistic fit of success on complexity and centrality, plus the
/// corruption count when it varies.
fn fit_rows(rows: &[&ResultRow]) -> FitResult {
    let vary_k = rows.iter().any(|r| r.corruption_count != rows[0].corruption_count);
    let mut names = vec!["complexity_z", "centrality_z"];
    if vary_k {
        names.push("corruption_count");
    }
    let x: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![r.complexity_z, r.centrality_z];
            if vary_k {
                v.push(r.corruption_count as f64);
            }
            v
        })
        .collect();
    let y: Vec<bool> = rows.iter().map(|r| r.score == 1).collect();
    match fit_logistic(&x, &y, &names) {
        Ok(f) => FitResult::Fit(f),
        Err(e) => FitResult::Error(e.to_string()),
    }
}

/// Writes the report tables into `report/`.
pub fn cmd_report(config: &PipelineConfig) -> Result<ReportSummary, PipelineError> {
    let store = Store::new(&config.store);
    let r = &config.report;
    let tasks = store.load_tasks()?;
    let hard: Vec<String> = select_hard_set(&tasks, &r.complexity_metric, &r.centrality_metric, r.hard_set_pct)
        .into_iter()
        .map(|t| t.task_id.clone())
        .collect();
    let mut trajectories = load_trajectories(&store)?;
    if r.hard_set_only {
        trajectories.retain(|t| hard.contains(&t.outcome.task_id));
    }
    let rows = result_rows(&tasks, &trajectories, &r.complexity_metric, &r.centrality_metric);
    if rows.is_empty() {
        return Err(PipelineError::NoResults(store.trajectories_dir()));
    }
    let dir = store.report_dir();
    std::fs::create_dir_all(&dir).map_err(io_error(&dir))?;
    let mut files = Vec::new();

    let mut by_label: BTreeMap<&str, Vec<&ResultRow>> = BTreeMap::new();
    for row in &rows {
        by_label.entry(row.label.as_str()).or_default().push(row);
    }

    // results.csv
    let path = dir.join("results.csv");
    let mut w = csv_writer(&path)?;
    let tools = all_tools();
    let mut header = vec![
        "task_id",
        "label",
        "mode",
        "score",
        "solved_at_attempt",
        "complexity_z",
        "centrality_z",
        "corruption_count",
        "info_calls",
        "submissions",
    ];
    header.extend(tools.iter().copied());
    w.write_record(&header).map_err(|e| csv_error(&path, e))?;
    for row in &rows {
        let mut rec = vec![
            row.task_id.clone(),
            row.label.clone(),
            row.mode.to_string(),
            row.score.to_string(),
            row.solved_at_attempt.map_or_else(String::new, |a| a.to_string()),
            row.complexity_z.to_string(),
            row.centrality_z.to_string(),
            row.corruption_count.to_string(),
            row.info_calls.to_string(),
            row.submissions.to_string(),
        ];
        rec.extend(tools.iter().map(|t| row.tool_counts.get(*t).copied().unwrap_or(0).to_string()));
        w.write_record(&rec).map_err(|e| csv_error(&path, e))?;
    }
    w.flush().map_err(io_error(&path))?;
    files.push(path);

    // fit.json
    let mut fits: BTreeMap<&str, FitResult> = by_label.iter().map(|(l, rs)| (*l, fit_rows(rs))).collect();
    let all: Vec<&ResultRow> = rows.iter().collect();
    fits.insert(POOLED_LABEL, fit_rows(&all));
    let path = dir.join("fit.json");
    write_json(&path, &fits)?;
    files.push(path);

    // passn.csv
    let path = dir.join("passn.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["label", "mode", "n", "pass_rate"]).map_err(|e| csv_error(&path, e))?;
    let mut groups: BTreeMap<(String, String), Vec<Trajectory>> = BTreeMap::new();
    for t in &trajectories {
        groups
            .entry((t.outcome.agent.clone(), t.outcome.mode.to_string()))
            .or_default()
            .push(t.clone());
    }
    for ((label, mode), ts) in &groups {
        for (i, rate) in passn_curve(ts).iter().enumerate() {
            w.write_record([label.clone(), mode.clone(), (i + 1).to_string(), rate.to_string()])
                .map_err(|e| csv_error(&path, e))?;
        }
    }
    w.flush().map_err(io_error(&path))?;
    files.push(path);

    // telemetry.csv
    let path = dir.join("telemetry.csv");
    let mut w = csv_writer(&path)?;
    let mut header = vec!["label", "mode", "trajectories", "mean_info_calls", "mean_submissions", "success_rate"];
    header.extend(tools.iter().copied());
    w.write_record(&header).map_err(|e| csv_error(&path, e))?;
    for t in telemetry_summary(&trajectories) {
        let mut rec = vec![
            t.label.clone(),
            t.mode.to_string(),
            t.trajectories.to_string(),
            t.mean_info_calls.to_string(),
            t.mean_submissions.to_string(),
            t.success_rate.to_string(),
        ];
        rec.extend(tools.iter().map(|tool| opt(t.tool_means.get(*tool).copied())));
        w.write_record(&rec).map_err(|e| csv_error(&path, e))?;
    }
    w.flush().map_err(io_error(&path))?;
    files.push(path);

    // grid.csv and grid_boundary.csv
    let grid_path = dir.join("grid.csv");
    let line_path = dir.join("grid_boundary.csv");
    let mut gw = csv_writer(&grid_path)?;
    let mut lw = csv_writer(&line_path)?;
    gw.write_record(["label", "x_center", "y_center", "count", "successes", "rate"])
        .map_err(|e| csv_error(&grid_path, e))?;
    lw.write_record(["label", "level", "logit", "a", "b", "c"])
        .map_err(|e| csv_error(&line_path, e))?;
    for (label, rs) in &by_label {
        let points: Vec<(f64, f64, bool)> = rs.iter().map(|r| (r.complexity_z, r.centrality_z, r.score == 1)).collect();
        let fit = match &fits[*label] {
            FitResult::Fit(f) => Some(f),
            FitResult::Error(_) => None,
        };
        let Ok(grid) = difficulty_grid(&points, r.grid_bins, fit) else {
            continue;
        };
        for c in &grid.cells {
            gw.write_record([
                label.to_string(),
                c.x_center.to_string(),
                c.y_center.to_string(),
                c.count.to_string(),
                c.successes.to_string(),
                opt(c.rate),
            ])
            .map_err(|e| csv_error(&grid_path, e))?;
        }
        for l in &grid.lines {
            lw.write_record([
                label.to_string(),
                l.level.clone(),
                l.logit.to_string(),
                l.a.to_string(),
                l.b.to_string(),
                l.c.to_string(),
            ])
            .map_err(|e| csv_error(&line_path, e))?;
        }
    }
    gw.flush().map_err(io_error(&grid_path))?;
    lw.flush().map_err(io_error(&line_path))?;
    files.push(grid_path);
    files.push(line_path);

    // comparisons.csv: solved versus unsolved, per label and quantity
    let path = dir.join("comparisons.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["label", "quantity", "n_solved", "n_unsolved", "u", "p_value", "rank_biserial", "exact", "cohens_d"])
        .map_err(|e| csv_error(&path, e))?;
    type Quantity = fn(&ResultRow) -> f64;
    let quantities: [(&str, Quantity); 4] = [
        ("complexity_z", |r| r.complexity_z),
        ("centrality_z", |r| r.centrality_z),
        ("info_calls", |r| r.info_calls as f64),
        ("submissions", |r| r.submissions as f64),
    ];
    for (label, rs) in &by_label {
        for (name, f) in quantities {
            let solved: Vec<f64> = rs.iter().filter(|r| r.score == 1).map(|r| f(r)).collect();
            let unsolved: Vec<f64> = rs.iter().filter(|r| r.score == 0).map(|r| f(r)).collect();
            let mw = mann_whitney(&solved, &unsolved).ok();
            let d = cohens_d(&solved, &unsolved).ok();
            w.write_record([
                label.to_string(),
                name.to_string(),
                solved.len().to_string(),
                unsolved.len().to_string(),
                opt(mw.map(|m| m.u)),
                opt(mw.map(|m| m.p_value)),
                opt(mw.map(|m| m.rank_biserial)),
                mw.map_or_else(String::new, |m| m.exact.to_string()),
                opt(d),
            ])
            .map_err(|e| csv_error(&path, e))?;
        }
    }
    w.flush().map_err(io_error(&path))?;
    files.push(path);

    // success_by_k.csv
    let path = dir.join("success_by_k.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["label", "k", "n", "success_rate", "ci_lower", "ci_upper"])
        .map_err(|e| csv_error(&path, e))?;
    for (label, rs) in &by_label {
        let mut by_k: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for row in rs {
            by_k.entry(row.corruption_count).or_default().push(f64::from(row.score));
        }
        for (k, scores) in by_k {
            let ci = bootstrap_mean_ci(&scores, r.bootstrap_resamples, 0.95, config.seed ^ k as u64).ok();
            w.write_record([
                label.to_string(),
                k.to_string(),
                scores.len().to_string(),
                opt(ci.map(|c| c.estimate)),
                opt(ci.map(|c| c.lower)),
                opt(ci.map(|c| c.upper)),
            ])
            .map_err(|e| csv_error(&path, e))?;
        }
    }
    w.flush().map_err(io_error(&path))?;
    files.push(path);

    let path = dir.join("hard_set.json");
    write_json(&path, &hard)?;
    files.push(path);

    Ok(ReportSummary {
        labels: by_label.keys().map(|l| l.to_string()).collect(),
        rows: rows.len(),
        hard_set: hard,
        files,
    })
}
