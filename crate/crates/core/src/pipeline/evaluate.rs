//! `evaluate`: run an agent over stored tasks and persist trajectories.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::{pool, write_json, PipelineError, Store};
use crate::evalcore::trajectory::TRAJECTORY_FILE;
use crate::evalcore::{
    run_agent, write_trajectory, AgentClient, CompetenceGradedAgent, EvalError, NullAgent, OracleAgent, ReplayAgent,
    SessionOptions,
};
use crate::taskgen::{select_hard_set, TaskInstance, TaskMode};

/// Which agent to run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgentSpec {
    /// Restores every target.
    Oracle,
    /// Makes no calls.
    Null,
    /// Restores the first `c` targets.
    Competence(usize),
    /// Replays `calls.jsonl` from `<dir>/<task_id>/`.
    Replay(PathBuf),
    /// OpenAI-compatible endpoint from `[llm]`.
    Live,
}

impl FromStr for AgentSpec {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || PipelineError::UnknownAgent(s.to_string());
        match s.split_once(':') {
            None => match s {
                "oracle" => Ok(AgentSpec::Oracle),
                "null" => Ok(AgentSpec::Null),
                "live" => Ok(AgentSpec::Live),
                _ => Err(unknown()),
            },
            Some(("competence", c)) => c.parse().map(AgentSpec::Competence).map_err(|_| unknown()),
            Some(("replay", dir)) if !dir.is_empty() => Ok(AgentSpec::Replay(PathBuf::from(dir))),
            _ => Err(unknown()),
        }
    }
}

impl AgentSpec {
    /// Trajectory label; one directory per label under `trajectories/`.
    pub fn label(&self, config: &PipelineConfig) -> String {
        match self {
            AgentSpec::Oracle => "oracle".into(),
            AgentSpec::Null => "null".into(),
            AgentSpec::Competence(c) => format!("competence-{c}"),
            AgentSpec::Replay(dir) => format!(
                "replay-{}",
                dir.file_name().map_or_else(|| "trajectories".into(), |n| n.to_string_lossy().to_string())
            ),
            AgentSpec::Live => format!("live-{}", config.llm.model),
        }
    }
}

/// Builds the agent for one task.
pub fn make_agent(
    spec: &AgentSpec,
    task: &TaskInstance,
    config: &PipelineConfig,
) -> Result<Box<dyn AgentClient>, PipelineError> {
    let root = &config.repo.root;
    Ok(match spec {
        AgentSpec::Oracle => Box::new(OracleAgent::new(task, root)?),
        AgentSpec::Null => Box::new(NullAgent),
        AgentSpec::Competence(c) => Box::new(CompetenceGradedAgent::new(task, root, *c)?),
        AgentSpec::Replay(dir) => Box::new(ReplayAgent::from_dir(spec.label(config), &dir.join(&task.task_id))?),
        #[cfg(feature = "live-llm")]
        AgentSpec::Live => Box::new(crate::llm::LiveClient::from_config(&config.llm).map_err(PipelineError::ClientFailure)?),
        #[cfg(not(feature = "live-llm"))]
        AgentSpec::Live => return Err(PipelineError::Config("the live agent needs the live-llm feature".into())),
    })
}

/// Which stored tasks to evaluate.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TaskFilter {
    pub mode: Option<TaskMode>,
    /// Explicit task ids; empty means all.
    pub ids: Vec<String>,
    /// Only tasks in the hard set (thresholds from `[report]`).
    pub hard_set: bool,
    /// Only tasks with this many corruptions.
    pub corruption_count: Option<usize>,
}

impl TaskFilter {
    pub fn apply(&self, tasks: Vec<TaskInstance>, config: &PipelineConfig) -> Vec<TaskInstance> {
        let hard: Option<Vec<String>> = self.hard_set.then(|| {
            let r = &config.report;
            select_hard_set(&tasks, &r.complexity_metric, &r.centrality_metric, r.hard_set_pct)
                .into_iter()
                .map(|t| t.task_id.clone())
                .collect()
        });
        tasks
            .into_iter()
            .filter(|t| self.mode.is_none_or(|m| t.mode == m))
            .filter(|t| self.ids.is_empty() || self.ids.contains(&t.task_id))
            .filter(|t| hard.as_ref().is_none_or(|h| h.contains(&t.task_id)))
            .filter(|t| self.corruption_count.is_none_or(|k| t.corruptions.len() == k))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub label: String,
    pub tasks: usize,
    pub evaluated: usize,
    /// Tasks skipped because a trajectory already existed.
    pub resumed: usize,
    pub solved: usize,
    /// Task ids whose agent failed mid-session.
    pub client_failures: Vec<String>,
}

impl EvaluationSummary {
    /// 4 when any agent call failed, else 0.
    pub fn exit_code(&self) -> i32 {
        if self.client_failures.is_empty() {
            0
        } else {
            4
        }
    }
}

enum TaskRun {
    Resumed(bool),
    Ran { solved: bool, client_failure: bool },
}

fn existing_score(dir: &Path) -> bool {
    crate::evalcore::read_trajectory(dir).is_ok_and(|t| t.outcome.score == 1)
}

/// Evaluates `spec` on the filtered tasks. Tasks that already have a
/// trajectory under this label are skipped unless `force` is set.
pub fn cmd_evaluate(
    config: &PipelineConfig,
    spec: &AgentSpec,
    filter: &TaskFilter,
    force: bool,
) -> Result<EvaluationSummary, PipelineError> {
    let store = Store::new(&config.store);
    let tasks = filter.apply(store.load_tasks()?, config);
    let baseline = store.load_baseline()?;
    let budget = config.budget()?;
    let label = spec.label(config);
    let options = SessionOptions {
        runner: config.runner(),
        read_threshold: config.evaluation.read_threshold,
        clock: config.evaluation.clock,
        session_id: None,
        agent: label.clone(),
    };

    let runs: Vec<Result<(String, TaskRun), PipelineError>> = pool(config.evaluation.jobs).install(|| {
        tasks
            .par_iter()
            .map(|task| {
                let dir = store.trajectory_dir(&label, &task.task_id);
                if !force && dir.join(TRAJECTORY_FILE).is_file() {
                    return Ok((task.task_id.clone(), TaskRun::Resumed(existing_score(&dir))));
                }
                let mut agent = make_agent(spec, task, config)?;
                let trajectory = run_agent(task, &config.repo.root, &baseline, budget, agent.as_mut(), options.clone())?;
                write_trajectory(&dir, &trajectory)?;
                let client_failure = trajectory
                    .outcome
                    .reason
                    .as_deref()
                    .is_some_and(|r| r.starts_with("client_failure"));
                Ok((
                    task.task_id.clone(),
                    TaskRun::Ran {
                        solved: trajectory.outcome.score == 1,
                        client_failure,
                    },
                ))
            })
            .collect()
    });

    let mut summary = EvaluationSummary {
        label: label.clone(),
        tasks: tasks.len(),
        evaluated: 0,
        resumed: 0,
        solved: 0,
        client_failures: Vec::new(),
    };
    for r in runs {
        match r {
            Ok((_, TaskRun::Resumed(solved))) => {
                summary.resumed += 1;
                summary.solved += usize::from(solved);
            }
            Ok((id, TaskRun::Ran { solved, client_failure })) => {
                summary.evaluated += 1;
                summary.solved += usize::from(solved);
                if client_failure {
                    summary.client_failures.push(id);
                }
            }
            Err(PipelineError::Eval(EvalError::ClientFailure(m))) | Err(PipelineError::ClientFailure(m)) => {
                return Err(PipelineError::ClientFailure(m))
            }
            Err(e) => return Err(e),
        }
    }
    write_json(
        &store.trajectories_dir().join(super::sanitize_label(&label)).join("summary.json"),
        &summary,
    )?;
    Ok(summary)
}
