//! JUnit XML report parsing.

use super::{TestOutcome, TestStatus};

/// Parses a JUnit XML document into outcomes. Test ids are
/// `classname::name`, or just `name` when the class is empty (pytest uses
/// that form for collection errors).
pub fn parse_junit(xml: &str) -> Result<Vec<TestOutcome>, roxmltree::Error> {
    let doc = roxmltree::Document::parse(xml)?;
    let mut out = Vec::new();
    for case in doc.descendants().filter(|n| n.has_tag_name("testcase")) {
        let class = case.attribute("classname").unwrap_or("");
        let name = case.attribute("name").unwrap_or("");
        let test_id = match (class.is_empty(), name.is_empty()) {
            (true, _) => name.to_string(),
            (false, true) => class.to_string(),
            (false, false) => format!("{class}::{name}"),
        };
        if test_id.is_empty() {
            continue;
        }
        let child = |tag: &str| case.children().any(|c| c.has_tag_name(tag));
        let status = if child("failure") {
            TestStatus::Fail
        } else if child("error") {
            TestStatus::Error
        } else if child("skipped") {
            TestStatus::Skipped
        } else {
            TestStatus::Pass
        };
        let duration = case
            .attribute("time")
            .and_then(|t| t.parse::<f64>().ok())
            .filter(|t| t.is_finite() && *t >= 0.0)
            .unwrap_or(0.0);
        out.push(TestOutcome {
            test_id,
            status,
            duration,
        });
    }
    Ok(out)
}
