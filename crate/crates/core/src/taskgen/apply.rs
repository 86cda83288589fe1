//! Splicing replacement definitions into files.

use std::path::{Path, PathBuf};

use super::Corruption;
use crate::python::{self, dedent, indent_lines, leading_whitespace};
use crate::repo::{module_name, UnitId};

#[derive(Debug, thiserror::Error)]
pub enum ApplyError {
    #[error("unit {0} not found")]
    UnitNotFound(String),
    #[error("replacement for {unit} is not a valid definition: {message}")]
    InvalidReplacement { unit: String, message: String },
    #[error("file {file} no longer parses after replacing {unit}: {message}")]
    Unparseable { unit: String, file: String, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Re-indents a definition from its own indentation to `indent`. Text
/// already at `indent` is kept verbatim.
pub fn reindent(source: &str, indent: &str) -> String {
    let first = source.lines().find(|l| !l.trim().is_empty()).unwrap_or_default();
    let own = leading_whitespace(first);
    let mut out = if own == indent {
        source.trim_start_matches(['\n', '\r']).to_string()
    } else {
        indent_lines(&dedent(source.trim_start_matches(['\n', '\r']), own), indent)
    };
    if !out.ends_with('\n') {
        out.push('\n');
    }
    out
}

/// Replaces the definition of `unit` under `root` with `new_source`.
///
/// The replacement must be a single `def`/`class` with the unit's name.
/// The file is rewritten only when it still parses afterwards.
pub fn apply_replacement(root: &Path, unit: &UnitId, new_source: &str) -> Result<(), ApplyError> {
    let def = python::parse_definition(new_source).map_err(|e| ApplyError::InvalidReplacement {
        unit: unit.to_string(),
        message: e.to_string(),
    })?;
    if def.name != unit.short_name() {
        return Err(ApplyError::InvalidReplacement {
            unit: unit.to_string(),
            message: format!("defines `{}`, expected `{}`", def.name, unit.short_name()),
        });
    }
    let path = root.join(unit.file());
    let io = |source| ApplyError::Io {
        path: path.clone(),
        source,
    };
    let text = std::fs::read_to_string(&path).map_err(io)?;
    let module = module_name(unit.file());
    let parsed = python::parse_module(&text, unit.file(), &module, unit.file().ends_with("__init__.py")).map_err(|e| {
        ApplyError::Unparseable {
            unit: unit.to_string(),
            file: unit.file().to_string(),
            message: e.to_string(),
        }
    })?;
    let found = parsed
        .unit(unit.qualname())
        .ok_or_else(|| ApplyError::UnitNotFound(unit.to_string()))?;
    let replacement = reindent(new_source, found.indent(&text));
    let updated = format!("{}{}{}", &text[..found.start], replacement, &text[found.end..]);
    python::check_syntax(&updated, unit.file()).map_err(|e| ApplyError::Unparseable {
        unit: unit.to_string(),
        file: unit.file().to_string(),
        message: e.to_string(),
    })?;
    std::fs::write(&path, updated).map_err(io)
}

pub fn apply_corruptions(root: &Path, corruptions: &[Corruption]) -> Result<(), ApplyError> {
    for c in corruptions {
        apply_replacement(root, &c.target, &c.corrupted_body)?;
    }
    Ok(())
}

/// Current source of `unit` in the tree at `root`.
pub fn read_unit_source(root: &Path, unit: &UnitId) -> Result<String, ApplyError> {
    let path = root.join(unit.file());
    let text = std::fs::read_to_string(&path).map_err(|source| ApplyError::Io {
        path: path.clone(),
        source,
    })?;
    let module = module_name(unit.file());
    let parsed = python::parse_module(&text, unit.file(), &module, unit.file().ends_with("__init__.py")).map_err(|e| {
        ApplyError::Unparseable {
            unit: unit.to_string(),
            file: unit.file().to_string(),
            message: e.to_string(),
        }
    })?;
    parsed
        .unit(unit.qualname())
        .map(|u| u.source(&text).to_string())
        .ok_or_else(|| ApplyError::UnitNotFound(unit.to_string()))
}
