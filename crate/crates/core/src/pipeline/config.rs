//! Pipeline configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::evalcore::{BudgetConfig, Clock, DEFAULT_READ_THRESHOLD};
use crate::harness::{RunnerConfig, DEFAULT_CAP_SECONDS, DEFAULT_TEST_COMMAND};
use crate::metrics::centrality::CentralityConfig;
use crate::metrics::METRIC_NAMES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Seed for every random choice in the pipeline.
    pub seed: u64,
    /// Task store and output directory.
    pub store: PathBuf,
    pub repo: RepoConfig,
    pub generation: GenerationConfig,
    pub evaluation: EvaluationConfig,
    pub report: ReportConfig,
    pub centrality: CentralityConfig,
    pub llm: LlmConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepoConfig {
    pub root: PathBuf,
    pub test_command: String,
    /// Source locator recorded in tasks; defaults to the root path.
    pub source: Option<String>,
    pub cap_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenerationMode {
    /// Deletion corruptions, remove-mode tasks.
    Remove,
    /// Single adversarial corruptions, discovery-mode tasks.
    Discovery,
    /// Several adversarial corruptions close on the call graph.
    Multifunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorruptionClientKind {
    /// Seeded token mutations.
    Mutation,
    /// Candidates from `replay_file`.
    Replay,
    /// OpenAI-compatible endpoint from `[llm]`.
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub modes: Vec<GenerationMode>,
    /// Per-task acceptance threshold.
    pub min_failing: usize,
    /// Per-corruption floor during adversarial generation.
    pub per_corruption_min_failing: usize,
    pub test_budget: usize,
    pub max_tool_calls: usize,
    pub multifunction_k: Vec<usize>,
    pub max_k: usize,
    pub max_distance: usize,
    pub sets_per_k: usize,
    /// Cap on adversarial targets (seeded choice); 0 means all units.
    pub max_targets: usize,
    pub corruption_client: CorruptionClientKind,
    /// JSON map of unit id to candidate definitions, for the replay client.
    pub replay_file: Option<PathBuf>,
    pub prompt_template: Option<PathBuf>,
    pub max_test_examples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Preset name (`xs`, `small`, `default`, `xl`) or `tools/attempts`.
    pub budget: String,
    pub read_threshold: usize,
    pub clock: Clock,
    /// Worker threads; 0 means one per CPU.
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub hard_set_pct: f64,
    pub complexity_metric: String,
    pub centrality_metric: String,
    pub grid_bins: usize,
    pub bootstrap_resamples: usize,
    pub hard_set_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_seconds: u64,
    pub temperature: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            store: PathBuf::from("store"),
            repo: RepoConfig::default(),
            generation: GenerationConfig::default(),
            evaluation: EvaluationConfig::default(),
            report: ReportConfig::default(),
            centrality: CentralityConfig::default(),
            llm: LlmConfig::default(),
        }
    }
}

impl Default for RepoConfig {
    fn default() -> Self {
        Self {
            root: PathBuf::from("."),
            test_command: DEFAULT_TEST_COMMAND.into(),
            source: None,
            cap_seconds: DEFAULT_CAP_SECONDS,
        }
    }
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            modes: vec![GenerationMode::Remove],
            min_failing: 5,
            per_corruption_min_failing: 2,
            test_budget: 5,
            max_tool_calls: 10,
            multifunction_k: vec![2, 3, 4],
            max_k: 4,
            max_distance: 4,
            sets_per_k: 5,
            max_targets: 0,
            corruption_client: CorruptionClientKind::Mutation,
            replay_file: None,
            prompt_template: None,
            max_test_examples: 5,
        }
    }
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            budget: "default".into(),
            read_threshold: DEFAULT_READ_THRESHOLD,
            clock: Clock::Logical,
            jobs: 0,
        }
    }
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            hard_set_pct: 0.90,
            complexity_metric: "loc".into(),
            centrality_metric: "harmonic".into(),
            grid_bins: 5,
            bootstrap_resamples: 1000,
            hard_set_only: false,
        }
    }
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            model: String::new(),
            api_key_env: "FAULTLINE_API_KEY".into(),
            timeout_seconds: 120,
            temperature: 0.0,
        }
    }
}

impl PipelineConfig {
    /// Reads a TOML file; relative paths resolve against its directory.
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut config: Self = toml::from_str(&text).map_err(|e| PipelineError::Config(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.store, &mut config.repo.root] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        for p in [&mut config.generation.replay_file, &mut config.generation.prompt_template]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let fail = |m: String| Err(PipelineError::Config(m));
        let g = &self.generation;
        if g.min_failing == 0 || g.per_corruption_min_failing == 0 {
            return fail("failing-test thresholds must be at least 1".into());
        }
        if self.repo.cap_seconds.is_nan() || self.repo.cap_seconds <= 0.0 {
            return fail("repo.cap_seconds must be positive".into());
        }
        if g.test_budget == 0 || g.max_tool_calls == 0 {
            return fail("test_budget and max_tool_calls must be at least 1".into());
        }
        if let Some(k) = g.multifunction_k.iter().find(|&&k| k < 1 || k > g.max_k) {
            return fail(format!("multifunction k={k} outside 1..={}", g.max_k));
        }
        if g.sets_per_k == 0 {
            return fail("sets_per_k must be at least 1".into());
        }
        if g.corruption_client == CorruptionClientKind::Replay && g.replay_file.is_none() {
            return fail("the replay corruption client needs generation.replay_file".into());
        }
        if !(0.0..=1.0).contains(&self.report.hard_set_pct) {
            return fail("report.hard_set_pct must lie in [0, 1]".into());
        }
        for m in [&self.report.complexity_metric, &self.report.centrality_metric] {
            if !METRIC_NAMES.contains(&m.as_str()) {
                return fail(format!("unknown metric {m}"));
            }
        }
        if self.report.grid_bins == 0 {
            return fail("report.grid_bins must be at least 1".into());
        }
        if !(self.centrality.alpha > 0.0 && self.centrality.alpha < 1.0) {
            return fail("centrality.alpha must lie in (0, 1)".into());
        }
        self.budget()?;
        Ok(())
    }

    pub fn budget(&self) -> Result<BudgetConfig, PipelineError> {
        BudgetConfig::preset(&self.evaluation.budget).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn runner(&self) -> RunnerConfig {
        RunnerConfig::new(&self.repo.test_command, self.repo.cap_seconds)
    }

    pub fn source_locator(&self) -> String {
        self.repo
            .source
            .clone()
            .unwrap_or_else(|| self.repo.root.display().to_string())
    }
}
