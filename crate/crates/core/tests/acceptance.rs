//! Acceptance suite: one PASS/FAIL line per headline criterion.
//!
//! Run with `cargo test -p faultline --test acceptance`. Exits nonzero when
//! any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, ensure, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use common::{fixture_root, fixture_task, max_oracle_error, py_literal, random_digraph, test_unit, tree_digest};
use faultline::analysis::{cohens_d, fit_logistic, mann_whitney, passn_curve};
use faultline::callgraph::chain_distance;
use faultline::evalcore::{
    open_session, read_trajectory, run_agent, AgentClient, BudgetConfig, EvalError, ReplayAgent, ScriptedAgent,
    SessionOptions, Trajectory,
};
use faultline::harness::{baseline_with, RunnerConfig, SuiteReport};
use faultline::metrics::read_metrics_csv;
use faultline::pipeline::{
    cmd_evaluate, cmd_generate, cmd_report, cmd_validate, load_trajectories, AgentSpec, GenerationMode,
    GenerationReport, PipelineConfig, Store, TaskFilter,
};
use faultline::repo::{ingest_repository, Repository};
use faultline::taskgen::{select_hard_set, Corruption, CorruptionMethod, TaskInstance, TaskMode};

const ORACLE_GRAPHS: u64 = 100;
const ORACLE_MAX_NODES: usize = 50;
const ORACLE_TOL: f64 = 1e-8;
const ORACLE_SECONDS: u64 = 60;
const GOLDEN_MIN_ROWS: usize = 30;
const MIN_TASKS: usize = 10;
const MIN_FAILING: usize = 5;
const GENERATION_SECONDS: u64 = 300;
const MAX_DISTANCE: usize = 4;
const MULTI_K: [usize; 3] = [2, 3, 4];
const TASKS_PER_K: usize = 3;
const PRESETS: [(&str, usize, usize); 4] = [("xs", 4, 1), ("small", 8, 2), ("default", 16, 4), ("xl", 32, 8)];
const BETA: [f64; 3] = [0.5, -1.2, 0.4];
const BETA_N: usize = 2000;
const BETA_SE: f64 = 3.0;
const AIC_TOL: f64 = 1e-9;
const MW_MAX_N: usize = 8;
const MW_TOL: f64 = 1e-12;
const COHEN_TOL: f64 = 1e-12;
const HARD_PCT_LEVELS: [f64; 3] = [0.90, 0.75, 0.50];
const SEED: u64 = 7;

const CLAMP: &str = "inventory/mathutil.py::_clamp";

/// A verdict plus a one-line detail.
type Verdict = Result<String>;

struct Suite {
    failures: usize,
}

impl Suite {
    fn check(&mut self, name: &str, f: impl FnOnce() -> Verdict) {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(anyhow!("panicked: {msg}"))
        });
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.1}s]"),
            Err(e) => {
                self.failures += 1;
                println!("FAIL {name}: {e:#} [{secs:.1}s]");
            }
        }
    }
}

fn pipeline_config(store: &Path, full: bool) -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.seed = SEED;
    c.store = store.to_path_buf();
    c.repo.root = fixture_root();
    c.repo.source = Some("fixture:inventory_repo".into());
    c.repo.cap_seconds = 30.0;
    c.generation.modes = vec![GenerationMode::Remove, GenerationMode::Discovery, GenerationMode::Multifunction];
    c.generation.max_distance = MAX_DISTANCE;
    if full {
        c.generation.multifunction_k = MULTI_K.to_vec();
        c.generation.sets_per_k = TASKS_PER_K;
    } else {
        c.generation.max_targets = 4;
        c.generation.multifunction_k = vec![2];
        c.generation.sets_per_k = 2;
    }
    c
}

/// The full store: every mode, every k.
struct FullStore {
    _dir: tempfile::TempDir,
    config: PipelineConfig,
    report: GenerationReport,
    tasks: Vec<TaskInstance>,
}

fn build_full_store() -> Result<FullStore> {
    let dir = tempfile::tempdir()?;
    let config = pipeline_config(dir.path(), true);
    let report = cmd_generate(&config)?;
    let tasks = Store::new(&config.store).load_tasks()?;
    Ok(FullStore {
        _dir: dir,
        config,
        report,
        tasks,
    })
}

fn metric_oracles() -> Verdict {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..ORACLE_GRAPHS {
        let (n, edges) = random_digraph(seed, ORACLE_MAX_NODES, 2.5);
        let err = max_oracle_error(n, &edges);
        ensure!(err <= ORACLE_TOL, "graph seed {seed} (n={n}) deviates by {err:e}");
        worst = worst.max(err);
    }
    let elapsed = t0.elapsed();
    ensure!(elapsed < Duration::from_secs(ORACLE_SECONDS), "took {elapsed:?}");
    Ok(format!("{ORACLE_GRAPHS} digraphs, max deviation {worst:.2e} <= {ORACLE_TOL:e}"))
}

fn complexity_goldens() -> Verdict {
    let (rows, mismatches) = common::complexity_golden_mismatches();
    ensure!(rows >= GOLDEN_MIN_ROWS, "only {rows} golden rows");
    ensure!(mismatches.is_empty(), "{}", mismatches.join("; "));
    Ok(format!("{rows} units match the golden table"))
}

/// Small all-mode run: generate, validate, evaluate and report.
fn small_pipeline(store: &Path) -> Result<(GenerationReport, Duration, usize)> {
    let config = pipeline_config(store, false);
    let t0 = Instant::now();
    let report = cmd_generate(&config)?;
    let elapsed = t0.elapsed();
    let validated = cmd_validate(&config)?;
    ensure!(
        validated.reproduced == validated.checked,
        "{} of {} tasks reproduced",
        validated.reproduced,
        validated.checked
    );
    for spec in [AgentSpec::Oracle, AgentSpec::Null, AgentSpec::Competence(1)] {
        cmd_evaluate(&config, &spec, &TaskFilter::default(), false)?;
    }
    cmd_report(&config)?;
    Ok((report, elapsed, validated.checked))
}

fn end_to_end_generation(store: &Path, run: &Result<(GenerationReport, Duration, usize)>) -> Verdict {
    let (report, elapsed, checked) = run.as_ref().map_err(|e| anyhow!("pipeline failed: {e:#}"))?;
    ensure!(*elapsed < Duration::from_secs(GENERATION_SECONDS), "generation took {elapsed:?}");
    let remove = report.remove.as_ref().context("remove stage missing")?;
    let tasks = Store::new(store).load_tasks()?;
    let removal: Vec<&TaskInstance> = tasks.iter().filter(|t| t.mode == TaskMode::Remove && t.corruptions.len() == 1).collect();
    ensure!(removal.len() >= MIN_TASKS, "only {} deletion tasks", removal.len());
    if let Some(t) = tasks.iter().find(|t| t.failing_tests.len() < MIN_FAILING) {
        bail!("task {} breaks only {} tests", t.task_id, t.failing_tests.len());
    }
    Ok(format!(
        "{} deletion tasks ({} candidates), all >= {MIN_FAILING} failing, {checked} re-validated exactly, generation {:.0}s",
        remove.accepted,
        remove.candidates,
        elapsed.as_secs_f64()
    ))
}

fn round_trip(full: &FullStore) -> Verdict {
    let mut per_mode = BTreeMap::new();
    for t in &full.tasks {
        *per_mode.entry(t.mode).or_insert(0usize) += 1;
    }
    for mode in [TaskMode::Remove, TaskMode::Discovery] {
        ensure!(per_mode.get(&mode).copied().unwrap_or(0) > 0, "no {mode} tasks generated");
    }
    let all = TaskFilter::default();
    let oracle = cmd_evaluate(&full.config, &AgentSpec::Oracle, &all, false)?;
    let null = cmd_evaluate(&full.config, &AgentSpec::Null, &all, false)?;
    ensure!(oracle.solved == oracle.tasks, "oracle solved {}/{}", oracle.solved, oracle.tasks);
    ensure!(null.solved == 0, "null solved {}/{}", null.solved, null.tasks);
    Ok(format!(
        "oracle {}/{} and null 0/{} over {} remove + {} discovery tasks",
        oracle.solved,
        oracle.tasks,
        null.tasks,
        per_mode[&TaskMode::Remove],
        per_mode[&TaskMode::Discovery]
    ))
}

fn clamp_discovery_task(repo: &Repository, baseline: &SuiteReport) -> TaskInstance {
    let unit = repo.unit(CLAMP).expect("fixture unit");
    let c = Corruption {
        target: unit.id.clone(),
        method: CorruptionMethod::Adversarial,
        corrupted_body: unit.source().replace("value < low", "value > low"),
        original_digest: unit.digest(),
    };
    fixture_task(repo, baseline, TaskMode::Discovery, vec![c])
}

fn anti_reward_hack(repo: &Repository, baseline: &SuiteReport) -> Verdict {
    let task = clamp_discovery_task(repo, baseline);
    let restore = repo.unit(CLAMP).unwrap().source();
    let neighbour = "inventory/mathutil.py::scale_values";
    let hack = format!(
        "@(lambda f: (exec({}, globals()), f)[1])\n{}",
        py_literal(&restore),
        repo.unit(neighbour).unwrap().source()
    );
    let stub_tests: Vec<(&'static str, serde_json::Value)> = task
        .failing_tests
        .iter()
        .map(|id| {
            let unit = test_unit(id);
            let name = unit.rsplit("::").next().unwrap().to_string();
            ("replace_function", json!({"unit_id": unit, "body": format!("def {name}():\n    pass\n")}))
        })
        .collect();
    let budget = BudgetConfig::new(4, stub_tests.len() + 1)?;
    let cases: Vec<(&str, Vec<(&'static str, serde_json::Value)>)> = vec![
        ("other-function", vec![("replace_function", json!({"unit_id": neighbour, "body": hack}))]),
        ("test-edits", stub_tests.clone()),
        (
            "test-edit-then-fix",
            vec![stub_tests[0].clone(), ("replace_function", json!({"unit_id": CLAMP, "body": restore}))],
        ),
    ];
    for (label, calls) in cases {
        let mut agent = ScriptedAgent::from_pairs(label, calls);
        let t = run_agent(&task, &repo.root, baseline, budget, &mut agent, SessionOptions::default())?;
        let last = t.outcome.submissions.last().context("no submission")?;
        ensure!(last.passed, "{label}: the hack did not make the suite pass");
        ensure!(t.outcome.score == 0, "{label}: scored {}", t.outcome.score);
    }
    Ok("3 scripted hacks pass the suite and all score 0".into())
}

/// Tasks with exactly `k` corruptions, at most `TASKS_PER_K`, in id order.
fn tasks_with_k(tasks: &[TaskInstance], k: usize) -> Vec<&TaskInstance> {
    let mut picked: Vec<&TaskInstance> = tasks.iter().filter(|t| t.corruptions.len() == k).collect();
    if k == 1 {
        // keep both modes represented
        picked.sort_by_key(|t| (t.mode != TaskMode::Discovery, t.task_id.clone()));
    }
    picked.truncate(TASKS_PER_K);
    picked
}

fn multifunction(full: &FullStore) -> Verdict {
    let graph = Store::new(&full.config.store).load_graph()?;
    let mut checked = 0;
    for t in full.tasks.iter().filter(|t| t.corruptions.len() > 1) {
        for (i, a) in t.corruptions.iter().enumerate() {
            for b in &t.corruptions[i + 1..] {
                let d = chain_distance(&graph, a.target.as_str(), b.target.as_str())?;
                ensure!(
                    d.is_some_and(|d| d <= MAX_DISTANCE),
                    "task {}: {} and {} at distance {d:?}",
                    t.task_id,
                    a.target.as_str(),
                    b.target.as_str()
                );
            }
        }
        checked += 1;
    }
    let per_k: Vec<(usize, usize)> = MULTI_K.iter().map(|&k| (k, tasks_with_k(&full.tasks, k).len())).collect();
    if let Some((k, _)) = per_k.iter().find(|(_, n)| *n == 0) {
        bail!("no k={k} task was generated (counts {per_k:?})");
    }

    let family = 1..=4usize;
    let mut rates = Vec::new();
    for k in 1..=4usize {
        let ids: Vec<String> = tasks_with_k(&full.tasks, k).iter().map(|t| t.task_id.clone()).collect();
        let filter = TaskFilter {
            ids: ids.clone(),
            ..TaskFilter::default()
        };
        let (mut solved, mut runs) = (0, 0);
        for c in family.clone() {
            let s = cmd_evaluate(&full.config, &AgentSpec::Competence(c), &filter, false)?;
            solved += s.solved;
            runs += s.tasks;
        }
        rates.push(solved as f64 / runs as f64);
    }
    ensure!(rates.windows(2).all(|w| w[1] <= w[0]), "success by k = {rates:?}");
    ensure!(rates[0] > rates[3], "success does not fall with k: {rates:?}");
    let shown: Vec<String> = rates.iter().map(|r| format!("{r:.2}")).collect();
    Ok(format!(
        "{checked} multi-target tasks within distance {MAX_DISTANCE}; success by k=1..4: {}",
        shown.join(", ")
    ))
}

fn budget_enforcement(repo: &Repository, baseline: &SuiteReport, full: &FullStore) -> Verdict {
    let task = full
        .tasks
        .iter()
        .find(|t| t.mode == TaskMode::Remove && t.corruptions.len() == 1)
        .context("no remove task")?;
    let wrong = format!("def {}(*args, **kwargs):\n    return None\n", task.corruptions[0].target.short_name());
    for (name, tools, attempts) in PRESETS {
        let budget = BudgetConfig::preset(name)?;
        ensure!((budget.max_tool_uses, budget.max_attempts) == (tools, attempts), "preset {name} is {budget:?}");
        let mut s = open_session(task, &repo.root, baseline, budget, SessionOptions::default())?;
        for _ in 0..tools {
            s.invoke("list_directory", &json!({"path": ""}))?;
        }
        ensure!(
            matches!(s.invoke("list_directory", &json!({"path": ""})), Err(EvalError::BudgetExhausted)),
            "{name}: info call {} was not refused",
            tools + 1
        );
        for _ in 0..attempts {
            s.invoke("submit_attempt", &json!({"body": wrong}))?;
        }
        ensure!(
            s.invoke("submit_attempt", &json!({"body": wrong})).is_err(),
            "{name}: attempt {} was not refused",
            attempts + 1
        );
        let t = s.finish(None);
        ensure!(
            (t.outcome.used_tools, t.outcome.used_attempts) == (tools, attempts),
            "{name}: used {}/{}",
            t.outcome.used_tools,
            t.outcome.used_attempts
        );
    }
    let stored = load_trajectories(&Store::new(&full.config.store))?;
    for t in &stored {
        let b = t.outcome.budget;
        ensure!(
            t.outcome.used_tools <= b.max_tool_uses && t.outcome.used_attempts <= b.max_attempts,
            "trajectory {}/{} over budget",
            t.outcome.agent,
            t.outcome.task_id
        );
        ensure!(t.info_calls() <= b.max_tool_uses && t.submissions() <= b.max_attempts, "event log over budget");
    }
    Ok(format!("4 presets refuse the call past each limit; {} stored trajectories within budget", stored.len()))
}

/// Exact two-sided p-values by listing every split of ranks 1..=n.
fn enumerated_p_values(n1: usize, n2: usize) -> Vec<(Vec<f64>, Vec<f64>, f64)> {
    let n = n1 + n2;
    let mut splits = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for r in 0..n {
            if mask & (1 << r) != 0 {
                a.push((r + 1) as f64);
            } else {
                b.push((r + 1) as f64);
            }
        }
        let u: f64 = a.iter().sum::<f64>() - (n1 * (n1 + 1) / 2) as f64;
        splits.push((a, b, u));
    }
    let total = splits.len() as f64;
    let us: Vec<f64> = splits.iter().map(|s| s.2).collect();
    splits
        .into_iter()
        .map(|(a, b, u)| {
            let le = us.iter().filter(|&&v| v <= u).count() as f64;
            let ge = us.iter().filter(|&&v| v >= u).count() as f64;
            (a, b, (2.0 * le.min(ge) / total).min(1.0))
        })
        .collect()
}

fn statistics(full: &FullStore) -> Verdict {
    // coefficient recovery
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut x = Vec::with_capacity(BETA_N);
    let mut y = Vec::with_capacity(BETA_N);
    for _ in 0..BETA_N {
        let row: Vec<f64> = vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let eta = BETA[0] + BETA[1] * row[0] + BETA[2] * row[1];
        y.push(rng.gen::<f64>() < 1.0 / (1.0 + (-eta).exp()));
        x.push(row);
    }
    let fit = fit_logistic(&x, &y, &["x1", "x2"])?;
    ensure!(fit.converged, "fit did not converge");
    let mut worst_se = 0.0f64;
    for (c, truth) in fit.coefficients.iter().zip(BETA) {
        let dev = (c.estimate - truth).abs() / c.std_error;
        ensure!(dev <= BETA_SE, "{} = {} is {dev:.2} SE from {truth}", c.name, c.estimate);
        worst_se = worst_se.max(dev);
    }

    // intercept-only AIC on balanced data
    let fit = fit_logistic(&vec![vec![]; 4], &[true, false, true, false], &[])?;
    let aic = 2.0 - 8.0 * 0.5f64.ln();
    ensure!((fit.aic - aic).abs() <= AIC_TOL, "AIC {} != {aic}", fit.aic);

    // exact Mann-Whitney against enumeration
    let mut partitions = 0;
    for n1 in 1..=MW_MAX_N {
        for n2 in 1..=MW_MAX_N {
            for (a, b, p) in enumerated_p_values(n1, n2) {
                let got = mann_whitney(&a, &b)?;
                ensure!(got.exact, "n1={n1} n2={n2} not exact");
                ensure!((got.p_value - p).abs() <= MW_TOL, "n1={n1} n2={n2} {a:?}: p {} != {p}", got.p_value);
                partitions += 1;
            }
        }
    }

    let d = cohens_d(&[1.0, 2.0, 3.0], &[3.0, 4.0, 5.0])?;
    ensure!((d + 2.0).abs() <= COHEN_TOL, "cohens_d = {d}");

    let trajectories = load_trajectories(&Store::new(&full.config.store))?;
    ensure!(!trajectories.is_empty(), "no stored trajectories");
    let mut by_label: BTreeMap<String, Vec<Trajectory>> = BTreeMap::new();
    for t in trajectories {
        by_label.entry(t.outcome.agent.clone()).or_default().push(t);
    }
    for (label, ts) in &by_label {
        let curve = passn_curve(ts);
        ensure!(curve.windows(2).all(|w| w[1] >= w[0]), "pass@n for {label} decreases: {curve:?}");
    }
    Ok(format!(
        "beta within {worst_se:.2} SE; AIC {aic:.6}; {partitions} rank partitions exact; d = {d}; pass@n monotone for {} agents",
        by_label.len()
    ))
}

fn replay_determinism(
    full: &FullStore,
    baseline: &SuiteReport,
    small_a: (&Path, &Result<(GenerationReport, Duration, usize)>),
    small_b: (&Path, &Result<(GenerationReport, Duration, usize)>),
) -> Verdict {
    let store = Store::new(&full.config.store);
    // the richest stored trajectory: most events, then first by label and task
    let recorded = load_trajectories(&store)?
        .into_iter()
        .max_by_key(|t| (t.events.len(), std::cmp::Reverse((t.outcome.agent.clone(), t.outcome.task_id.clone()))))
        .context("no trajectories")?;
    let task = full
        .tasks
        .iter()
        .find(|t| t.task_id == recorded.outcome.task_id)
        .context("task missing")?;
    let dir = store.trajectory_dir(&recorded.outcome.agent, &task.task_id);
    let mut replay = ReplayAgent::from_dir(recorded.outcome.agent.clone(), &dir)?;
    ensure!(replay.label() == recorded.outcome.agent, "label changed");
    let options = SessionOptions {
        agent: recorded.outcome.agent.clone(),
        clock: full.config.evaluation.clock,
        ..SessionOptions::default()
    };
    let budget = recorded.outcome.budget;
    let again = run_agent(task, &full.config.repo.root, baseline, budget, &mut replay, options)?;
    let on_disk = read_trajectory(&dir)?;
    ensure!(again.to_jsonl() == on_disk.to_jsonl(), "replayed event log differs");
    ensure!(again.outcome.score == on_disk.outcome.score, "replayed score differs");

    for (_, run) in [&small_a, &small_b] {
        run.as_ref().map_err(|e| anyhow!("pipeline failed: {e:#}"))?;
    }
    let (a, b) = (tree_digest(small_a.0), tree_digest(small_b.0));
    let differing: Vec<&String> = a
        .keys()
        .chain(b.keys())
        .filter(|k| a.get(*k) != b.get(*k))
        .collect();
    ensure!(differing.is_empty(), "stores differ in {differing:?}");
    ensure!(a.keys().any(|k| k.starts_with("report/")), "no report files written");
    Ok(format!(
        "replayed {} events of {}/{} identically; two seeded pipeline runs agree on {} files",
        again.events.len(),
        recorded.outcome.agent,
        &task.task_id[..12],
        a.len()
    ))
}

fn hard_set(full: &FullStore) -> Verdict {
    let r = &full.config.report;
    let records = read_metrics_csv(&Store::new(&full.config.store).metrics_path())?;
    // percentile = share of units strictly below, computed here without the library
    let percentile = |metric: &str, unit: &str| -> f64 {
        let value = |rec: &faultline::metrics::MetricsRecord| rec.get(metric).expect("known metric");
        let own = value(records.iter().find(|rec| rec.unit.as_str() == unit).expect("unit in metrics.csv"));
        records.iter().filter(|rec| value(rec) < own).count() as f64 / records.len() as f64
    };
    let max_pct = |t: &TaskInstance, metric: &str| {
        t.corruptions
            .iter()
            .map(|c| percentile(metric, c.target.as_str()))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    // the rule is checked at the headline threshold and at looser ones where tasks qualify
    let mut counts = Vec::new();
    for pct in HARD_PCT_LEVELS {
        let selected: Vec<&str> = select_hard_set(&full.tasks, &r.complexity_metric, &r.centrality_metric, pct)
            .iter()
            .map(|t| t.task_id.as_str())
            .collect();
        for t in &full.tasks {
            let qualifies = max_pct(t, &r.complexity_metric) >= pct && max_pct(t, &r.centrality_metric) >= pct;
            ensure!(
                qualifies == selected.contains(&t.task_id.as_str()),
                "pct {pct}: task {} qualifies={qualifies} but selection disagrees",
                t.task_id
            );
        }
        counts.push(format!("{} at {pct}", selected.len()));
    }
    let everything = select_hard_set(&full.tasks, &r.complexity_metric, &r.centrality_metric, 0.0).len();
    ensure!(everything == full.tasks.len(), "pct 0 selects {everything}/{}", full.tasks.len());
    Ok(format!(
        "{} of {} tasks ({} x {}), all {} at pct 0",
        counts.join(", "),
        full.tasks.len(),
        r.complexity_metric,
        r.centrality_metric,
        everything
    ))
}

fn main() {
    let started = Instant::now();
    let mut suite = Suite { failures: 0 };
    suite.check("metric-oracle equivalence", metric_oracles);
    suite.check("complexity goldens", complexity_goldens);

    let root = fixture_root();
    let repo = ingest_repository(&root, faultline::harness::DEFAULT_TEST_COMMAND).expect("fixture parses");
    let baseline = baseline_with(&root, &RunnerConfig::default()).expect("fixture baseline passes");

    let small_dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let small_a = small_pipeline(small_dirs[0].path());
    suite.check("end-to-end generation", || end_to_end_generation(small_dirs[0].path(), &small_a));

    let full = build_full_store();
    let with_full = |f: &dyn Fn(&FullStore) -> Verdict| -> Verdict {
        match &full {
            Ok(store) => f(store),
            Err(e) => Err(anyhow!("full store generation failed: {e:#}")),
        }
    };
    if let Ok(f) = &full {
        eprintln!("full store: {} tasks, report {:?}", f.tasks.len(), f.report.multifunction);
    }
    suite.check("round-trip oracle", || with_full(&round_trip));
    suite.check("anti-reward-hack", || anti_reward_hack(&repo, &baseline));
    suite.check("multifunction constraint", || with_full(&multifunction));
    suite.check("budget enforcement", || with_full(&|f| budget_enforcement(&repo, &baseline, f)));
    suite.check("statistics", || with_full(&statistics));

    let small_b = small_pipeline(small_dirs[1].path());
    suite.check("replay determinism", || {
        with_full(&|f| replay_determinism(f, &baseline, (small_dirs[0].path(), &small_a), (small_dirs[1].path(), &small_b)))
    });
    suite.check("hard-set rule", || with_full(&hard_set));

    println!(
        "{} criteria, {} failed, {:.0}s",
        10,
        suite.failures,
        started.elapsed().as_secs_f64()
    );
    if suite.failures > 0 {
        std::process::exit(1);
    }
}
