//! Repository model: ingestion of a Python source tree into definition units.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::Command;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::callgraph::CallGraph;
use crate::digest::sha256_hex;
use crate::python::{self, CallTarget, ImportBinding};

pub const SNAPSHOT_SCHEMA_VERSION: u32 = 1;

/// Directories never descended into during ingestion and snapshotting.
pub const SKIPPED_DIRS: &[&str] = &[
    "__pycache__",
    "node_modules",
    "venv",
    "env",
    "site-packages",
    "build",
    "dist",
];

#[derive(Debug, thiserror::Error)]
pub enum RepoError {
    #[error("path not found: {0}")]
    PathNotFound(PathBuf),
    #[error("no functions, methods or classes found under {0}")]
    NoUnitsFound(PathBuf),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Stable unit identifier: `relative/path.py::Qualified.name`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnitId(String);

impl UnitId {
    pub fn new(file: &str, qualname: &str) -> Self {
        Self(format!("{file}::{qualname}"))
    }

    pub fn parse(raw: &str) -> Option<Self> {
        let (file, qual) = raw.split_once("::")?;
        (!file.is_empty() && !qual.is_empty()).then(|| Self(raw.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn file(&self) -> &str {
        self.0.split_once("::").map(|(f, _)| f).unwrap_or(&self.0)
    }

    pub fn qualname(&self) -> &str {
        self.0.split_once("::").map(|(_, q)| q).unwrap_or("")
    }

    /// Last segment of the qualified name, without any `#n` suffix.
    pub fn short_name(&self) -> &str {
        let q = self.qualname();
        let q = q.split('#').next().unwrap_or(q);
        q.rsplit('.').next().unwrap_or(q)
    }
}

impl fmt::Display for UnitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::borrow::Borrow<str> for UnitId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for UnitId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Function,
    Method,
    Class,
}

/// 1-based inclusive line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionUnit {
    pub id: UnitId,
    pub kind: UnitKind,
    /// Header text including decorators, verbatim.
    pub signature: String,
    /// Docstring statement as written (quotes and indentation included), or empty.
    pub docstring: String,
    pub body: String,
    pub span: Span,
}

impl FunctionUnit {
    pub fn source(&self) -> String {
        format!("{}{}{}", self.signature, self.docstring, self.body)
    }

    pub fn file(&self) -> &str {
        self.id.file()
    }

    pub fn digest(&self) -> String {
        sha256_hex(self.source())
    }
}

/// Per-file facts the call graph needs beyond the units themselves.
#[derive(Debug, Clone, Default)]
pub struct SourceFile {
    pub module: String,
    pub imports: Vec<ImportBinding>,
    pub calls: BTreeMap<String, Vec<CallTarget>>,
    pub classes: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct Repository {
    pub root: PathBuf,
    pub commit: String,
    pub units: Vec<FunctionUnit>,
    pub test_command: String,
    pub metadata: BTreeMap<String, serde_json::Value>,
    /// Relative paths of test modules; their definitions are not units.
    pub test_files: Vec<String>,
    pub sources: BTreeMap<String, SourceFile>,
}

impl Repository {
    pub fn unit(&self, id: &str) -> Option<&FunctionUnit> {
        self.units
            .binary_search_by(|u| u.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.units[i])
    }

    pub fn units_in_file<'a>(&'a self, file: &'a str) -> impl Iterator<Item = &'a FunctionUnit> + 'a {
        self.units.iter().filter(move |u| u.file() == file)
    }

    pub fn parse_failures(&self) -> Vec<String> {
        match self.metadata.get("parse_failures") {
            Some(serde_json::Value::Array(items)) => items
                .iter()
                .filter_map(|v| v.as_str().map(str::to_string))
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn snapshot(&self, graph: &CallGraph) -> RepoSnapshot {
        RepoSnapshot {
            schema_version: SNAPSHOT_SCHEMA_VERSION,
            root: self.root.display().to_string(),
            commit: self.commit.clone(),
            test_command: self.test_command.clone(),
            units: self
                .units
                .iter()
                .map(|u| SnapshotUnit {
                    id: u.id.clone(),
                    kind: u.kind,
                    span: u.span,
                    signature_sha256: sha256_hex(&u.signature),
                    docstring_sha256: sha256_hex(&u.docstring),
                    body_sha256: sha256_hex(&u.body),
                })
                .collect(),
            edges: graph.edges().map(|(a, b)| (a.clone(), b.clone())).collect(),
            unresolved: graph.unresolved.clone(),
            metadata: self.metadata.clone(),
        }
    }
}

/// `repo.snapshot.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepoSnapshot {
    pub schema_version: u32,
    pub root: String,
    pub commit: String,
    pub test_command: String,
    pub units: Vec<SnapshotUnit>,
    pub edges: Vec<(UnitId, UnitId)>,
    pub unresolved: Vec<(UnitId, String)>,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotUnit {
    pub id: UnitId,
    pub kind: UnitKind,
    pub span: Span,
    pub signature_sha256: String,
    pub docstring_sha256: String,
    pub body_sha256: String,
}

pub fn is_test_path(rel: &str) -> bool {
    let mut parts: Vec<&str> = rel.split('/').collect();
    let name = parts.pop().unwrap_or_default();
    name.starts_with("test_")
        || name.ends_with("_test.py")
        || name == "conftest.py"
        || parts.iter().any(|p| *p == "tests" || *p == "test")
}

/// Dotted module path for a repository-relative `.py` file.
pub fn module_name(rel: &str) -> String {
    let stem = rel.strip_suffix(".py").unwrap_or(rel);
    let stem = stem.strip_suffix("/__init__").unwrap_or(stem);
    let stem = if stem == "__init__" { "" } else { stem };
    stem.replace('/', ".")
}

pub(crate) fn skip_entry(entry: &walkdir::DirEntry) -> bool {
    if entry.depth() == 0 {
        return false;
    }
    let name = entry.file_name().to_string_lossy();
    entry.file_type().is_dir() && (name.starts_with('.') || SKIPPED_DIRS.contains(&name.as_ref()))
}

/// Repository-relative paths of all `.py` files, sorted.
pub fn python_files(root: &Path) -> Vec<String> {
    let mut files: Vec<String> = WalkDir::new(root)
        .into_iter()
        .filter_entry(|e| !skip_entry(e))
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file() && e.path().extension().is_some_and(|x| x == "py"))
        .filter_map(|e| {
            e.path()
                .strip_prefix(root)
                .ok()
                .map(|p| p.to_string_lossy().replace(std::path::MAIN_SEPARATOR, "/"))
        })
        .collect();
    files.sort();
    files
}

fn detect_commit(root: &Path) -> String {
    if !root.join(".git").exists() {
        return "unversioned".to_string();
    }
    Command::new("git")
        .arg("-C")
        .arg(root)
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unversioned".to_string())
}

enum FileParse {
    Parsed(Vec<FunctionUnit>, SourceFile),
    Failed(String),
}

fn parse_file(root: &Path, rel: &str) -> Result<FileParse, RepoError> {
    let path = root.join(rel);
    let text = std::fs::read_to_string(&path).map_err(|source| RepoError::Io {
        path: path.clone(),
        source,
    })?;
    let module = module_name(rel);
    let is_package = rel.ends_with("__init__.py");
    let parsed = match python::parse_module(&text, rel, &module, is_package) {
        Ok(p) => p,
        Err(e) => {
            log::warn!("skipping {rel}: {e}");
            return Ok(FileParse::Failed(rel.to_string()));
        }
    };
    let mut source = SourceFile {
        module,
        imports: parsed.imports,
        ..Default::default()
    };
    let units = parsed
        .units
        .into_iter()
        .map(|u| {
            source.calls.insert(u.qualname.clone(), u.calls.clone());
            if let Some(class) = &u.class {
                source.classes.insert(u.qualname.clone(), class.clone());
            }
            FunctionUnit {
                id: UnitId::new(rel, &u.qualname),
                kind: u.kind,
                signature: u.signature(&text).to_string(),
                docstring: u.docstring(&text).to_string(),
                body: u.body(&text).to_string(),
                span: Span {
                    start: u.start_line,
                    end: u.end_line,
                },
            }
        })
        .collect();
    Ok(FileParse::Parsed(units, source))
}

/// Parses every non-test Python file under `root` into units.
pub fn ingest_repository(root: &Path, test_command: &str) -> Result<Repository, RepoError> {
    if !root.is_dir() {
        return Err(RepoError::PathNotFound(root.to_path_buf()));
    }
    let files = python_files(root);
    let (test_files, source_files): (Vec<String>, Vec<String>) =
        files.into_iter().partition(|f| is_test_path(f));

    let parsed: Vec<FileParse> = source_files
        .par_iter()
        .map(|rel| parse_file(root, rel))
        .collect::<Result<_, _>>()?;

    let mut units = Vec::new();
    let mut sources = BTreeMap::new();
    let mut failures = Vec::new();
    for (rel, result) in source_files.iter().zip(parsed) {
        match result {
            FileParse::Parsed(file_units, source) => {
                units.extend(file_units);
                sources.insert(rel.clone(), source);
            }
            FileParse::Failed(path) => failures.push(serde_json::Value::String(path)),
        }
    }
    if units.is_empty() {
        return Err(RepoError::NoUnitsFound(root.to_path_buf()));
    }
    units.sort_by(|a, b| a.id.cmp(&b.id));

    let mut metadata = BTreeMap::new();
    metadata.insert("parse_failures".to_string(), serde_json::Value::Array(failures));
    Ok(Repository {
        root: root.to_path_buf(),
        commit: detect_commit(root),
        units,
        test_command: test_command.to_string(),
        metadata,
        test_files,
        sources,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_id_parts() {
        let id = UnitId::new("pkg/a.py", "C.m");
        assert_eq!(id.file(), "pkg/a.py");
        assert_eq!(id.qualname(), "C.m");
        assert_eq!(id.short_name(), "m");
        assert_eq!(UnitId::from("pkg/a.py::P.x#2").short_name(), "x");
        assert!(UnitId::parse("nofile").is_none());
    }

    #[test]
    fn module_names() {
        assert_eq!(module_name("pkg/a.py"), "pkg.a");
        assert_eq!(module_name("pkg/__init__.py"), "pkg");
        assert_eq!(module_name("top.py"), "top");
    }

    #[test]
    fn test_paths() {
        assert!(is_test_path("tests/test_a.py"));
        assert!(is_test_path("pkg/a_test.py"));
        assert!(is_test_path("conftest.py"));
        assert!(is_test_path("tests/helpers.py"));
        assert!(!is_test_path("pkg/testing.py"));
    }

    #[test]
    fn ingest_qualified_names() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.py"), "def f():\n    return 1\n\nclass C:\n    def m(self):\n        return f()\n").unwrap();
        let repo = ingest_repository(dir.path(), "true").unwrap();
        let ids: Vec<_> = repo.units.iter().map(|u| u.id.as_str()).collect();
        assert_eq!(ids, ["a.py::C", "a.py::C.m", "a.py::f"]);
        assert_eq!(repo.commit, "unversioned");
    }

    #[test]
    fn syntax_errors_are_isolated() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("good.py"), "def f():\n    pass\n").unwrap();
        std::fs::write(dir.path().join("bad.py"), "def g(:\n").unwrap();
        let repo = ingest_repository(dir.path(), "true").unwrap();
        assert_eq!(repo.units.len(), 1);
        assert_eq!(repo.parse_failures(), vec!["bad.py".to_string()]);
    }

    #[test]
    fn empty_and_missing_roots() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            ingest_repository(dir.path(), "true"),
            Err(RepoError::NoUnitsFound(_))
        ));
        assert!(matches!(
            ingest_repository(&dir.path().join("nope"), "true"),
            Err(RepoError::PathNotFound(_))
        ));
    }
}
