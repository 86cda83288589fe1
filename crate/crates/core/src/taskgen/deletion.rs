//! Deletion corruption: keep signature and docstring, drop the implementation.

use super::{Corruption, CorruptionMethod, TaskgenError};
use crate::python::leading_whitespace;
use crate::repo::{Repository, UnitKind};

pub const PLACEHOLDER_STATEMENT: &str = "raise NotImplementedError";

pub fn delete_function(repo: &Repository, target: &str) -> Result<Corruption, TaskgenError> {
    let unit = repo
        .unit(target)
        .ok_or_else(|| TaskgenError::UnknownUnit(target.to_string()))?;
    if unit.kind == UnitKind::Class {
        return Err(TaskgenError::UnsupportedTarget {
            target: target.to_string(),
            reason: "classes are not deletion targets".into(),
        });
    }
    let sig_indent = leading_whitespace(unit.signature.lines().last().unwrap_or_default());
    let body_indent = [unit.docstring.as_str(), unit.body.as_str()]
        .iter()
        .flat_map(|part| part.lines())
        .find(|l| !l.trim().is_empty() && l.starts_with([' ', '\t']))
        .map(|l| leading_whitespace(l).to_string())
        .unwrap_or_else(|| format!("{sig_indent}    "));

    let mut out = unit.signature.clone();
    if !out.ends_with('\n') {
        // one-line definition: the body followed the colon
        out = out.trim_end().to_string();
        out.push('\n');
    }
    if unit.docstring.starts_with([' ', '\t']) || unit.docstring.is_empty() {
        out.push_str(&unit.docstring);
    } else {
        // inline docstring after the colon
        out.push_str(&body_indent);
        out.push_str(unit.docstring.trim_end());
        out.push('\n');
    }
    if !out.ends_with('\n') {
        out.push('\n');
    }
    out.push_str(&body_indent);
    out.push_str(PLACEHOLDER_STATEMENT);
    out.push('\n');

    Ok(Corruption {
        target: unit.id.clone(),
        method: CorruptionMethod::Deletion,
        corrupted_body: out,
        original_digest: unit.digest(),
    })
}
