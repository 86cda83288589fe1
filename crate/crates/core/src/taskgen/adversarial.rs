//! Adversarial corruption: a client proposes modified definitions and sees
//! test feedback for a bounded number of rounds.

use std::collections::{BTreeSet, HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::{Captures, Regex};
use rustpython_parser::Tok;
use serde::{Deserialize, Serialize};

use super::apply::reindent;
use super::validate::{run_corrupted, CorruptedRun};
use super::{Corruption, CorruptionMethod, TaskgenError};
use crate::digest::sha256_hex;
use crate::harness::{failing_diff, RunnerConfig, SuiteExit, SuiteReport};
use crate::python::{self, ImportBinding};
use crate::repo::{module_name, Repository, UnitId};

/// Corruption prompt template. Slots: `{function_path}`, `{func_code}`,
/// `{test_examples}`, `{test_budget}`, `{max_iterations}` (the last two
/// also in their `{self.…}` spelling).
pub const CORRUPTION_PROMPT_TEMPLATE: &str = include_str!("../../templates/corruption_prompt.txt");

pub fn render_corruption_prompt(
    function_path: &str,
    func_code: &str,
    test_examples: &str,
    test_budget: usize,
    max_iterations: usize,
) -> String {
    render_prompt_template(
        CORRUPTION_PROMPT_TEMPLATE,
        function_path,
        func_code,
        test_examples,
        test_budget,
        max_iterations,
    )
}

/// Fills the slots of a corruption prompt template in one pass, so slot
/// text inside substituted values is left alone.
pub fn render_prompt_template(
    template: &str,
    function_path: &str,
    func_code: &str,
    test_examples: &str,
    test_budget: usize,
    max_iterations: usize,
) -> String {
    let slot = Regex::new(r"\{(?:self\.)?(function_path|func_code|test_examples|test_budget|max_iterations)\}")
        .expect("slot pattern");
    slot.replace_all(template, |c: &Captures| match &c[1] {
        "function_path" => function_path.to_string(),
        "func_code" => func_code.to_string(),
        "test_examples" => test_examples.to_string(),
        "test_budget" => test_budget.to_string(),
        _ => max_iterations.to_string(),
    })
    .into_owned()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialConfig {
    /// Submit-and-observe rounds.
    pub test_budget: usize,
    /// Total client calls allowed.
    pub max_tool_calls: usize,
    /// Per-corruption floor of newly failing tests.
    pub min_failing: usize,
    pub max_test_examples: usize,
    pub runner: RunnerConfig,
    /// Replacement prompt template text; the built-in one when `None`.
    #[serde(default)]
    pub prompt_template: Option<String>,
}

impl Default for AdversarialConfig {
    fn default() -> Self {
        Self {
            test_budget: 5,
            max_tool_calls: 10,
            min_failing: 2,
            max_test_examples: 5,
            runner: RunnerConfig::default(),
            prompt_template: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionFeedback {
    pub candidate: String,
    /// Passed the shape checks and ran.
    pub valid: bool,
    /// Valid and broke at least the floor of tests.
    pub qualifies: bool,
    pub failing_tests: Vec<String>,
    pub message: String,
}

pub struct CorruptionContext<'a> {
    pub target: &'a UnitId,
    pub prompt: &'a str,
    /// Original definition source.
    pub original: &'a str,
    pub history: &'a [CorruptionFeedback],
    pub remaining_submissions: usize,
}

/// Source of candidate corruptions (a language model, a script, a replay).
pub trait CorruptionClient: Send + Sync {
    /// Next candidate definition, or `None` to stop submitting.
    fn propose(&self, ctx: &CorruptionContext<'_>) -> Result<Option<String>, String>;
}

/// Result of the submit-and-observe loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialOutcome {
    pub corruption: Corruption,
    /// Tests the accepted candidate broke when it was submitted.
    pub failing_tests: Vec<String>,
    pub history: Vec<CorruptionFeedback>,
}

/// Runs the submit-and-observe loop and returns the last qualifying candidate.
pub fn adversarial_corrupt(
    repo: &Repository,
    baseline: &SuiteReport,
    target: &str,
    client: &dyn CorruptionClient,
    config: &AdversarialConfig,
) -> Result<Corruption, TaskgenError> {
    adversarial_corrupt_detailed(repo, baseline, target, client, config).map(|o| o.corruption)
}

/// [`adversarial_corrupt`] with the feedback history and the accepted
/// candidate's failing tests.
pub fn adversarial_corrupt_detailed(
    repo: &Repository,
    baseline: &SuiteReport,
    target: &str,
    client: &dyn CorruptionClient,
    config: &AdversarialConfig,
) -> Result<AdversarialOutcome, TaskgenError> {
    let unit = repo
        .unit(target)
        .ok_or_else(|| TaskgenError::UnknownUnit(target.to_string()))?;
    let original = unit.source();
    let original_def = python::parse_definition(&original)?;
    let examples = relevant_tests(repo, &unit.id, config.max_test_examples);
    let prompt = render_prompt_template(
        config.prompt_template.as_deref().unwrap_or(CORRUPTION_PROMPT_TEMPLATE),
        unit.file(),
        &original,
        &examples.join("\n"),
        config.test_budget,
        config.max_tool_calls,
    );
    let indent = original_def.indent.clone();

    let rounds = config.test_budget.min(config.max_tool_calls);
    let mut history: Vec<CorruptionFeedback> = Vec::new();
    let mut best: Option<(String, Vec<String>)> = None;
    for round in 0..rounds {
        let ctx = CorruptionContext {
            target: &unit.id,
            prompt: &prompt,
            original: &original,
            history: &history,
            remaining_submissions: rounds - round,
        };
        let Some(candidate) = client.propose(&ctx).map_err(TaskgenError::ClientFailure)? else {
            break;
        };
        let candidate = reindent(&candidate, &indent);
        let mut feedback = CorruptionFeedback {
            candidate: candidate.clone(),
            valid: false,
            qualifies: false,
            failing_tests: Vec::new(),
            message: String::new(),
        };
        match python::parse_definition(&candidate) {
            Err(e) => feedback.message = format!("does not parse: {e}"),
            Ok(def) if def.name != original_def.name || def.is_class != original_def.is_class => {
                feedback.message = format!("must define `{}`", original_def.name)
            }
            Ok(def) if def.signature.trim_end() != original_def.signature.trim_end() => {
                feedback.message = "the function definition line must not change".into()
            }
            Ok(_) if candidate == original => feedback.message = "candidate is identical to the original".into(),
            Ok(_) => {
                let corruption = Corruption {
                    target: unit.id.clone(),
                    method: CorruptionMethod::Adversarial,
                    corrupted_body: candidate.clone(),
                    original_digest: unit.digest(),
                };
                match run_corrupted(&repo.root, std::slice::from_ref(&corruption), &config.runner)? {
                    CorruptedRun::Report(report) if report.exit == SuiteExit::Completed => {
                        let failing = failing_diff(baseline, &report);
                        feedback.valid = true;
                        feedback.qualifies = failing.len() >= config.min_failing;
                        feedback.message = format!("{} previously passing tests fail", failing.len());
                        feedback.failing_tests = failing.into_iter().collect();
                    }
                    CorruptedRun::Report(_) => feedback.message = "test suite timed out".into(),
                    CorruptedRun::ApplyFailed(m) | CorruptedRun::Crashed(m) => feedback.message = m,
                }
            }
        }
        log::debug!("{target} round {round}: {}", feedback.message);
        if feedback.qualifies {
            best = Some((candidate, feedback.failing_tests.clone()));
        }
        history.push(feedback);
    }
    match best {
        Some((body, failing_tests)) => Ok(AdversarialOutcome {
            corruption: Corruption {
                target: unit.id.clone(),
                method: CorruptionMethod::Adversarial,
                corrupted_body: body,
                original_digest: unit.digest(),
            },
            failing_tests,
            history,
        }),
        None => Err(TaskgenError::NoValidCorruption {
            target: target.to_string(),
            attempts: history.len(),
        }),
    }
}

fn imported_modules(imports: &[ImportBinding], known: &BTreeSet<String>) -> Vec<String> {
    imports
        .iter()
        .map(|b| match &b.attr {
            Some(attr) => {
                let sub = format!("{}.{attr}", b.module);
                if known.contains(&sub) {
                    sub
                } else {
                    b.module.clone()
                }
            }
            None => b.module.clone(),
        })
        .collect()
}

/// Excerpts of test functions from test files that transitively import the
/// target's module; tests naming the target come first. At most `max`.
pub fn relevant_tests(repo: &Repository, target: &UnitId, max: usize) -> Vec<String> {
    let known: BTreeSet<String> = repo.sources.values().map(|s| s.module.clone()).collect();
    let module_imports: HashMap<&str, Vec<String>> = repo
        .sources
        .values()
        .map(|s| (s.module.as_str(), imported_modules(&s.imports, &known)))
        .collect();
    let target_module = module_name(target.file());
    let name = target.short_name();

    let reaches_target = |start: Vec<String>| {
        let mut seen: BTreeSet<String> = BTreeSet::new();
        let mut queue: VecDeque<String> = start.into();
        while let Some(m) = queue.pop_front() {
            if m == target_module {
                return true;
            }
            if !seen.insert(m.clone()) {
                continue;
            }
            // importing a submodule executes its parent packages
            let mut parts: Vec<&str> = m.split('.').collect();
            while parts.len() > 1 {
                parts.pop();
                queue.push_back(parts.join("."));
            }
            if let Some(next) = module_imports.get(m.as_str()) {
                queue.extend(next.iter().cloned());
            }
        }
        false
    };

    let mut first: Vec<String> = Vec::new();
    let mut rest: Vec<String> = Vec::new();
    for rel in &repo.test_files {
        let Ok(text) = std::fs::read_to_string(repo.root.join(rel)) else {
            continue;
        };
        let Ok(parsed) = python::parse_module(&text, rel, &module_name(rel), rel.ends_with("__init__.py")) else {
            continue;
        };
        if !reaches_target(imported_modules(&parsed.imports, &known)) {
            continue;
        }
        for u in parsed.units.iter().filter(|u| u.qualname.rsplit('.').next().is_some_and(|n| n.starts_with("test"))) {
            let excerpt = format!("# {rel}\n{}", u.source(&text).trim_end());
            if u.source(&text).contains(name) {
                first.push(excerpt);
            } else {
                rest.push(excerpt);
            }
        }
    }
    first.into_iter().chain(rest).take(max).collect()
}

/// Deterministic scripted client: proposes single-token mutations
/// (flipped comparisons, swapped arithmetic and boolean operators,
/// shifted numeric literals, flipped booleans) in a seeded order, and stops
/// once a candidate qualifies and breaks at least `goal` tests.
#[derive(Debug, Clone)]
pub struct MutationCorruptor {
    pub seed: u64,
    pub goal: usize,
}

impl MutationCorruptor {
    pub fn new(seed: u64) -> Self {
        Self { seed, goal: 0 }
    }

    /// Keeps proposing until a qualifying candidate breaks `goal` tests.
    pub fn with_goal(seed: u64, goal: usize) -> Self {
        Self { seed, goal }
    }

    /// All single-site mutants of `source`'s implementation, in seeded order.
    pub fn candidates(&self, target: &UnitId, source: &str) -> Vec<String> {
        let Ok(def) = python::parse_definition(source) else {
            return Vec::new();
        };
        let Ok(tokens) = python::lex_unit(source) else {
            return Vec::new();
        };
        // Implementation starts after signature and docstring, which sit at
        // the front of `source` with `def.indent` prepended to each line.
        let header_lines = def.signature.lines().count() + def.docstring.lines().count();
        let body_start: usize = source.split_inclusive('\n').take(header_lines).map(str::len).sum();

        let mut out = Vec::new();
        let mut prev: Option<&Tok> = None;
        for (tok, range) in tokens.iter().filter(|(_, r)| r.start >= body_start) {
            let text = &source[range.clone()];
            // `*` after an operand is multiplication, otherwise unpacking
            let binary = matches!(
                prev,
                Some(Tok::Name { .. } | Tok::Int { .. } | Tok::Float { .. } | Tok::Rpar | Tok::Rsqb)
            );
            prev = Some(tok);
            let replacement = match tok {
                Tok::Less => Some("<=".to_string()),
                Tok::LessEqual => Some("<".to_string()),
                Tok::Greater => Some(">=".to_string()),
                Tok::GreaterEqual => Some(">".to_string()),
                Tok::EqEqual => Some("!=".to_string()),
                Tok::NotEqual => Some("==".to_string()),
                Tok::Plus => Some("-".to_string()),
                Tok::Minus => Some("+".to_string()),
                Tok::Star if binary => Some("/".to_string()),
                Tok::Slash => Some("*".to_string()),
                Tok::DoubleSlash => Some("/".to_string()),
                Tok::Float { .. } => text.parse::<f64>().ok().map(|v| format!("{:?}", v + 1.0)),
                Tok::And => Some("or".to_string()),
                Tok::Or => Some("and".to_string()),
                Tok::True => Some("False".to_string()),
                Tok::False => Some("True".to_string()),
                Tok::Int { .. } => text.parse::<u64>().ok().map(|n| (n + 1).to_string()),
                _ => None,
            };
            if let Some(r) = replacement {
                out.push(format!("{}{}{}", &source[..range.start], r, &source[range.end..]));
            }
        }
        let digest = sha256_hex(target.as_str());
        let salt = u64::from_str_radix(&digest[..16], 16).unwrap_or(0);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ salt);
        out.shuffle(&mut rng);
        out
    }
}

impl CorruptionClient for MutationCorruptor {
    fn propose(&self, ctx: &CorruptionContext<'_>) -> Result<Option<String>, String> {
        if ctx
            .history
            .last()
            .is_some_and(|f| f.qualifies && f.failing_tests.len() >= self.goal)
        {
            return Ok(None);
        }
        Ok(self.candidates(ctx.target, ctx.original).into_iter().nth(ctx.history.len()))
    }
}

/// Replays scripted candidates per target, in order.
#[derive(Debug, Clone, Default)]
pub struct ReplayCorruptor {
    pub scripts: HashMap<UnitId, Vec<String>>,
}

impl ReplayCorruptor {
    pub fn new(scripts: HashMap<UnitId, Vec<String>>) -> Self {
        Self { scripts }
    }
}

impl CorruptionClient for ReplayCorruptor {
    fn propose(&self, ctx: &CorruptionContext<'_>) -> Result<Option<String>, String> {
        Ok(self
            .scripts
            .get(ctx.target)
            .and_then(|s| s.get(ctx.history.len()))
            .cloned())
    }
}
