use serde_json::Value;
use thiserror::Error;

use super::{validate, BranchGraph, ValidationIssue};

const SIGNIFICANT_DIGITS: usize = 9;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid graph: {}", summarize(.0))]
    Invalid(Vec<ValidationIssue>),
    #[error("cannot parse graph: {0}")]
    Parse(String),
}

fn summarize(issues: &[ValidationIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl GraphError {
    pub fn issues(&self) -> &[ValidationIssue] {
        match self {
            GraphError::Invalid(issues) => issues,
            GraphError::Parse(_) => &[],
        }
    }
}

/// Rounds to nine significant digits. The shortest repr of the result is
/// what serde_json prints, so equal inputs print identically everywhere.
fn round_significant(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return 0.0;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .unwrap_or(x)
}

fn round_floats(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            let r = round_significant(n.as_f64().unwrap_or(0.0));
            *value = serde_json::Number::from_f64(r).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Orders the collections whose in-memory order carries no meaning.
fn canonicalize(graph: &BranchGraph) -> BranchGraph {
    let mut g = graph.clone();
    g.exclusion_zones.sort_by(|a, b| {
        a.start
            .total_cmp(&b.start)
            .then(a.end.total_cmp(&b.end))
            .then(a.kind.cmp(&b.kind))
    });
    g.cues.sort_by_key(|c| (c.scene_index, c.branch_index));
    g
}

/// Canonical JSON for a valid graph.
pub fn emit(graph: &BranchGraph) -> Result<String, GraphError> {
    let issues = validate(graph);
    if !issues.is_empty() {
        return Err(GraphError::Invalid(issues));
    }
    let mut value =
        serde_json::to_value(canonicalize(graph)).map_err(|e| GraphError::Parse(e.to_string()))?;
    round_floats(&mut value);
    let mut text =
        serde_json::to_string_pretty(&value).map_err(|e| GraphError::Parse(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn parse(text: &str) -> Result<BranchGraph, GraphError> {
    serde_json::from_str(text).map_err(|e| GraphError::Parse(e.to_string()))
}
