//! `ingest`, `generate` and `validate`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{CorruptionClientKind, GenerationMode, PipelineConfig};
use super::{io_error, pool, read_json, write_json, PipelineError, Store, StoredBaseline};
use crate::callgraph::{build_call_graph, chain_distance, CallGraph};
use crate::harness::{baseline_with, SuiteReport};
use crate::metrics::{compute_metrics, correlation_matrix, normalize, write_correlations_csv, write_metrics_csv};
use crate::repo::{ingest_repository, Repository, UnitId, UnitKind};
use crate::taskgen::{
    adversarial_corrupt_detailed, delete_function, select_multifunction_sets, task_id, validate_task, write_task,
    AdversarialConfig, Corruption, CorruptionClient, GeneratorInfo, MutationCorruptor, RepoRef, ReplayCorruptor,
    TargetMetrics, TaskInstance, TaskMode, TaskgenError, ValidationConfig, GENERATOR_VERSION,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub commit: String,
    pub units: usize,
    pub functions: usize,
    pub methods: usize,
    pub classes: usize,
    pub edges: usize,
    pub unresolved_calls: usize,
    pub parse_failures: Vec<String>,
    /// False when there were too few units to normalize or correlate.
    pub correlations_written: bool,
}

/// Everything derived from the repository before any suite runs.
pub struct Ingested {
    pub repo: Repository,
    pub graph: CallGraph,
    pub metrics: BTreeMap<UnitId, TargetMetrics>,
    pub summary: IngestSummary,
}

/// Parses the repository, builds the call graph and metrics, and writes the
/// snapshot, `metrics.csv` and `correlations.csv` into the store.
pub fn ingest(config: &PipelineConfig) -> Result<Ingested, PipelineError> {
    let store = Store::new(&config.store);
    std::fs::create_dir_all(&store.root).map_err(io_error(&store.root))?;
    let repo = ingest_repository(&config.repo.root, &config.repo.test_command)?;
    let graph = build_call_graph(&repo);
    write_json(&store.snapshot_path(), &repo.snapshot(&graph))?;

    let records = compute_metrics(&repo, &graph, &config.centrality)?;
    write_metrics_csv(&records, &store.metrics_path())?;
    let mut metrics = BTreeMap::new();
    let mut correlations_written = false;
    match normalize(&records) {
        Ok(normalized) => {
            for (record, norm) in records.iter().zip(normalized) {
                metrics.insert(
                    record.unit.clone(),
                    TargetMetrics {
                        record: record.clone(),
                        normalized: norm,
                    },
                );
            }
            if let Ok(matrix) = correlation_matrix(&records) {
                write_correlations_csv(&matrix, &store.correlations_path())?;
                correlations_written = true;
            }
        }
        Err(e) => log::warn!("skipping normalization: {e}"),
    }

    let count = |k: UnitKind| repo.units.iter().filter(|u| u.kind == k).count();
    let summary = IngestSummary {
        commit: repo.commit.clone(),
        units: repo.units.len(),
        functions: count(UnitKind::Function),
        methods: count(UnitKind::Method),
        classes: count(UnitKind::Class),
        edges: graph.edge_count(),
        unresolved_calls: graph.unresolved.len(),
        parse_failures: repo.parse_failures(),
        correlations_written,
    };
    Ok(Ingested {
        repo,
        graph,
        metrics,
        summary,
    })
}

pub fn cmd_ingest(config: &PipelineConfig) -> Result<IngestSummary, PipelineError> {
    let store = Store::new(&config.store);
    let _lock = store.lock()?;
    Ok(ingest(config)?.summary)
}

/// Candidate and acceptance counts for one generation stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub candidates: usize,
    pub accepted: usize,
    /// Rejections keyed by reason.
    pub rejected: BTreeMap<String, usize>,
}

impl StageReport {
    fn reject(&mut self, reason: &str) {
        *self.rejected.entry(reason.to_string()).or_default() += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiStageReport {
    pub requested_sets: usize,
    pub found_sets: usize,
    pub stage: StageReport,
}

/// `generation_report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub generator: GeneratorInfo,
    pub commit: String,
    pub baseline_passing: usize,
    pub remove: Option<StageReport>,
    pub discovery: Option<StageReport>,
    /// Keyed by k.
    pub multifunction: BTreeMap<usize, MultiStageReport>,
    pub task_ids: Vec<String>,
}

fn corruption_client(config: &PipelineConfig) -> Result<Box<dyn CorruptionClient>, PipelineError> {
    let g = &config.generation;
    match g.corruption_client {
        CorruptionClientKind::Mutation => Ok(Box::new(MutationCorruptor::with_goal(config.seed, g.min_failing))),
        CorruptionClientKind::Replay => {
            let path = g
                .replay_file
                .as_ref()
                .ok_or_else(|| PipelineError::Config("generation.replay_file is required".into()))?;
            let scripts: HashMap<UnitId, Vec<String>> = read_json(path)?;
            Ok(Box::new(ReplayCorruptor::new(scripts)))
        }
        #[cfg(feature = "live-llm")]
        CorruptionClientKind::Live => Ok(Box::new(
            crate::llm::LiveClient::from_config(&config.llm).map_err(PipelineError::ClientFailure)?,
        )),
        #[cfg(not(feature = "live-llm"))]
        CorruptionClientKind::Live => Err(PipelineError::Config(
            "the live corruption client needs the live-llm feature".into(),
        )),
    }
}

fn reason_of(e: &TaskgenError) -> &'static str {
    match e {
        TaskgenError::UnsupportedTarget { .. } => "unsupported_target",
        TaskgenError::NoValidCorruption { .. } => "no_valid_corruption",
        TaskgenError::UnknownUnit(_) => "unknown_unit",
        _ => "error",
    }
}

struct Builder<'a> {
    commit: &'a str,
    source: String,
    seed: u64,
    metrics: &'a BTreeMap<UnitId, TargetMetrics>,
}

impl Builder<'_> {
    fn task(&self, mode: TaskMode, corruptions: Vec<Corruption>, failing: BTreeSet<String>) -> TaskInstance {
        let metrics = corruptions
            .iter()
            .filter_map(|c| self.metrics.get(&c.target).map(|m| (c.target.clone(), m.clone())))
            .collect();
        TaskInstance {
            task_id: task_id(self.commit, mode, &corruptions),
            repo_ref: RepoRef {
                source: self.source.clone(),
                commit: self.commit.to_string(),
            },
            mode,
            corruptions,
            failing_tests: failing.into_iter().collect(),
            metrics,
            generator: GeneratorInfo {
                version: GENERATOR_VERSION.to_string(),
                seed: self.seed,
            },
        }
    }
}

/// Runs the baseline, generates and validates tasks for every configured
/// mode, and rewrites `tasks/` and `generation_report.json`.
pub fn cmd_generate(config: &PipelineConfig) -> Result<GenerationReport, PipelineError> {
    config.validate()?;
    let store = Store::new(&config.store);
    let _lock = store.lock()?;
    let tasks_dir = store.tasks_dir();
    if tasks_dir.exists() {
        std::fs::remove_dir_all(&tasks_dir).map_err(io_error(&tasks_dir))?;
    }

    let Ingested {
        repo, graph, metrics, ..
    } = ingest(config)?;
    let runner = config.runner();
    let baseline: SuiteReport = baseline_with(&repo.root, &runner)?;
    write_json(
        &store.baseline_path(),
        &StoredBaseline::from_report(&baseline, &config.repo.test_command),
    )?;

    let g = &config.generation;
    let validation = ValidationConfig {
        min_failing: g.min_failing,
        runner: runner.clone(),
    };
    let builder = Builder {
        commit: &repo.commit,
        source: config.source_locator(),
        seed: config.seed,
        metrics: &metrics,
    };
    let threads = pool(config.evaluation.jobs);
    let mut tasks: Vec<TaskInstance> = Vec::new();
    let mut report = GenerationReport {
        generator: GeneratorInfo {
            version: GENERATOR_VERSION.to_string(),
            seed: config.seed,
        },
        commit: repo.commit.clone(),
        baseline_passing: baseline.passing().len(),
        remove: None,
        discovery: None,
        multifunction: BTreeMap::new(),
        task_ids: Vec::new(),
    };
    let targets: Vec<&UnitId> = repo
        .units
        .iter()
        .filter(|u| u.kind != UnitKind::Class)
        .map(|u| &u.id)
        .collect();

    if g.modes.contains(&GenerationMode::Remove) {
        let mut stage = StageReport {
            candidates: targets.len(),
            ..Default::default()
        };
        let results: Vec<Result<(Corruption, crate::taskgen::Validation), TaskgenError>> = threads.install(|| {
            targets
                .par_iter()
                .map(|t| {
                    let c = delete_function(&repo, t.as_str())?;
                    let v = validate_task(&repo.root, &baseline, std::slice::from_ref(&c), &validation)?;
                    Ok((c, v))
                })
                .collect()
        });
        for r in results {
            match r {
                Ok((c, v)) if v.accepted => {
                    stage.accepted += 1;
                    tasks.push(builder.task(TaskMode::Remove, vec![c], v.failing_tests));
                }
                Ok((_, v)) => stage.reject(v.reason.map_or("rejected", |r| r.as_str())),
                Err(e @ (TaskgenError::Harness(_) | TaskgenError::Io { .. })) => return Err(e.into()),
                Err(e) => stage.reject(reason_of(&e)),
            }
        }
        report.remove = Some(stage);
    }

    let adversarial_needed = g.modes.contains(&GenerationMode::Discovery) || g.modes.contains(&GenerationMode::Multifunction);
    let mut corrupted: BTreeMap<UnitId, (Corruption, BTreeSet<String>)> = BTreeMap::new();
    if adversarial_needed {
        let client = corruption_client(config)?;
        let template = match &g.prompt_template {
            Some(p) => Some(std::fs::read_to_string(p).map_err(io_error(p))?),
            None => None,
        };
        let adv = AdversarialConfig {
            test_budget: g.test_budget,
            max_tool_calls: g.max_tool_calls,
            min_failing: g.per_corruption_min_failing,
            max_test_examples: g.max_test_examples,
            runner: runner.clone(),
            prompt_template: template,
        };
        // classes may be corrupted adversarially, never deleted
        let mut chosen: Vec<&UnitId> = repo.units.iter().map(|u| &u.id).collect();
        if g.max_targets > 0 && g.max_targets < chosen.len() {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            chosen.shuffle(&mut rng);
            chosen.truncate(g.max_targets);
            chosen.sort();
        }
        let mut stage = StageReport {
            candidates: chosen.len(),
            ..Default::default()
        };
        let results: Vec<Result<_, TaskgenError>> = threads.install(|| {
            chosen
                .par_iter()
                .map(|t| adversarial_corrupt_detailed(&repo, &baseline, t.as_str(), client.as_ref(), &adv))
                .collect()
        });
        for r in results {
            match r {
                Ok(o) => {
                    let failing: BTreeSet<String> = o.failing_tests.into_iter().collect();
                    corrupted.insert(o.corruption.target.clone(), (o.corruption, failing));
                }
                Err(e @ (TaskgenError::ClientFailure(_) | TaskgenError::Harness(_) | TaskgenError::Io { .. })) => {
                    return Err(e.into())
                }
                Err(e) => stage.reject(reason_of(&e)),
            }
        }

        if g.modes.contains(&GenerationMode::Discovery) {
            // the accepted candidate's own run already shows which tests it breaks
            for (c, failing) in corrupted.values() {
                if failing.len() >= g.min_failing {
                    stage.accepted += 1;
                    tasks.push(builder.task(TaskMode::Discovery, vec![c.clone()], failing.clone()));
                } else {
                    stage.reject("too_few_failures");
                }
            }
            report.discovery = Some(stage);
        }
    }

    if g.modes.contains(&GenerationMode::Multifunction) {
        let candidates: Vec<UnitId> = corrupted.keys().cloned().collect();
        for &k in &g.multifunction_k {
            let selection = select_multifunction_sets(&graph, &candidates, k, g.max_distance, g.sets_per_k, config.seed ^ k as u64);
            let mut stage = StageReport {
                candidates: selection.sets.len(),
                ..Default::default()
            };
            let results: Vec<Result<(Vec<Corruption>, crate::taskgen::Validation), TaskgenError>> =
                threads.install(|| {
                    selection
                        .sets
                        .par_iter()
                        .map(|set| {
                            let cs: Vec<Corruption> = set.iter().map(|t| corrupted[t].0.clone()).collect();
                            let v = validate_task(&repo.root, &baseline, &cs, &validation)?;
                            Ok((cs, v))
                        })
                        .collect()
                });
            for r in results {
                let (cs, v) = r?;
                if v.accepted {
                    stage.accepted += 1;
                    tasks.push(builder.task(TaskMode::Discovery, cs, v.failing_tests));
                } else {
                    stage.reject(v.reason.map_or("rejected", |r| r.as_str()));
                }
            }
            report.multifunction.insert(
                k,
                MultiStageReport {
                    requested_sets: selection.requested,
                    found_sets: selection.sets.len(),
                    stage,
                },
            );
        }
    }

    tasks.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    tasks.dedup_by(|a, b| a.task_id == b.task_id);
    for t in &tasks {
        write_task(&store.root, t)?;
    }
    report.task_ids = tasks.iter().map(|t| t.task_id.clone()).collect();
    write_json(&store.generation_report_path(), &report)?;
    if tasks.is_empty() {
        return Err(PipelineError::NoTasksGenerated);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskCheck {
    pub task_id: String,
    pub ok: bool,
    pub problems: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub checked: usize,
    pub reproduced: usize,
    pub tasks: Vec<TaskCheck>,
}

/// Re-runs every stored task and checks it reproduces its failing set,
/// its structural invariants and the target distance bound.
pub fn cmd_validate(config: &PipelineConfig) -> Result<ValidationSummary, PipelineError> {
    let store = Store::new(&config.store);
    let tasks = store.load_tasks()?;
    let baseline = store.load_baseline()?;
    let graph = store.load_graph()?;
    let g = &config.generation;
    let validation = ValidationConfig {
        min_failing: g.min_failing,
        runner: config.runner(),
    };
    let threads = pool(config.evaluation.jobs);
    let checks: Vec<Result<TaskCheck, PipelineError>> = threads.install(|| {
        tasks
            .par_iter()
            .map(|task| {
                let mut problems = Vec::new();
                if let Err(e) = task.check_invariants(g.min_failing) {
                    problems.push(e);
                }
                for (i, a) in task.corruptions.iter().enumerate() {
                    for b in &task.corruptions[i + 1..] {
                        match chain_distance(&graph, a.target.as_str(), b.target.as_str()) {
                            Ok(Some(d)) if d <= g.max_distance => {}
                            Ok(d) => problems.push(format!("{} and {} at distance {d:?}", a.target, b.target)),
                            Err(e) => problems.push(e.to_string()),
                        }
                    }
                }
                let v = validate_task(&config.repo.root, &baseline, &task.corruptions, &validation)?;
                let expected: BTreeSet<String> = task.failing_tests.iter().cloned().collect();
                if !v.accepted {
                    problems.push(format!("rejected on re-run: {}", v.reason.map_or("unknown", |r| r.as_str())));
                } else if v.failing_tests != expected {
                    problems.push(format!(
                        "failing set changed: {} stored, {} now",
                        expected.len(),
                        v.failing_tests.len()
                    ));
                }
                Ok(TaskCheck {
                    task_id: task.task_id.clone(),
                    ok: problems.is_empty(),
                    problems,
                })
            })
            .collect()
    });
    let tasks = checks.into_iter().collect::<Result<Vec<_>, _>>()?;
    let summary = ValidationSummary {
        checked: tasks.len(),
        reproduced: tasks.iter().filter(|t| t.ok).count(),
        tasks,
    };
    let bad: Vec<String> = summary.tasks.iter().filter(|t| !t.ok).map(|t| t.task_id.clone()).collect();
    if !bad.is_empty() {
        for t in summary.tasks.iter().filter(|t| !t.ok) {
            log::error!("{}: {}", t.task_id, t.problems.join("; "));
        }
        return Err(PipelineError::ValidationFailed(bad));
    }
    Ok(summary)
}
