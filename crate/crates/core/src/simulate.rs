//! Headless playthroughs of a compiled graph.
//!
//! A playthrough starts in the first scene on its default branch and makes
//! one decision at every branching point. Traces are deterministic, and
//! feeding a trace back as a script reproduces it byte for byte.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::BranchGraph;

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("graph has no scenes")]
    EmptyGraph,
    #[error("scene {0} has no branches")]
    NoBranches(usize),
    #[error("script line {line}: {message}")]
    Script { line: usize, message: String },
    #[error("script: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScriptEntry {
    /// Let the timer run out.
    Default,
    /// Pick a branch by 0-based index.
    Choose(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Policy {
    /// Never choose; every point times out to the default branch.
    DefaultOnly,
    /// Always pick the branch with the highest social score.
    SocialArgmax,
    /// One entry per branching point. Missing entries time out.
    Script(Vec<ScriptEntry>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cause {
    UserChoice,
    DefaultTimeout,
    /// Recorded by interactive players only; simulation never produces it.
    NavigationJump,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub branch_point: usize,
    pub time: f64,
    /// 0-based scene entered at this point.
    pub scene: usize,
    /// 0-based branch taken.
    pub branch: usize,
    pub cause: Cause,
    pub cue: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recap: Option<String>,
    /// Choice that was asked for but could not be honoured.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requested: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaythroughTrace {
    pub initial_branch: usize,
    pub initial_cue: String,
    pub events: Vec<TraceEvent>,
}

impl PlaythroughTrace {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("trace serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<PlaythroughTrace, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Script that replays this trace.
    pub fn to_script(&self) -> Vec<ScriptEntry> {
        self.events
            .iter()
            .map(|e| match (e.cause, e.requested) {
                (Cause::DefaultTimeout, Some(r)) => ScriptEntry::Choose(r),
                (Cause::DefaultTimeout, None) => ScriptEntry::Default,
                _ => ScriptEntry::Choose(e.branch),
            })
            .collect()
    }
}

fn cue_text(graph: &BranchGraph, scene: usize, branch: usize) -> (String, Option<String>) {
    match graph.cue(scene, branch) {
        Some(c) => (c.announcement(), c.recap_line()),
        None => (
            format!("[Scene {} of {}]", scene + 1, graph.scenes.len()),
            None,
        ),
    }
}

pub fn simulate(graph: &BranchGraph, policy: &Policy) -> Result<PlaythroughTrace, SimulateError> {
    let first = graph.scenes.first().ok_or(SimulateError::EmptyGraph)?;
    if first.branches.is_empty() {
        return Err(SimulateError::NoBranches(0));
    }
    let (initial_cue, _) = cue_text(graph, 0, first.default_branch);
    let mut events = Vec::new();

    for (k, point) in graph.branch_points.iter().enumerate() {
        let Some(scene_idx) = graph
            .scenes
            .iter()
            .position(|s| s.span.start_point == Some(point.id))
        else {
            continue;
        };
        let scene = &graph.scenes[scene_idx];
        let n = scene.branches.len();
        if n == 0 {
            return Err(SimulateError::NoBranches(scene_idx));
        }
        let wanted = match policy {
            Policy::DefaultOnly => None,
            Policy::SocialArgmax => {
                Some(scene.branches.iter().enumerate().fold(0, |b, (i, br)| {
                    if br.social_score > scene.branches[b].social_score {
                        i
                    } else {
                        b
                    }
                }))
            }
            Policy::Script(entries) => match entries.get(k) {
                Some(ScriptEntry::Choose(i)) => Some(*i),
                _ => None,
            },
        };
        let (branch, cause, requested, error) = match wanted {
            Some(i) if i < n => (i, Cause::UserChoice, None, None),
            Some(i) => (
                scene.default_branch,
                Cause::DefaultTimeout,
                Some(i),
                Some(format!("branch {i} out of range for {n} branches")),
            ),
            None => (scene.default_branch, Cause::DefaultTimeout, None, None),
        };
        let (cue, recap) = cue_text(graph, scene_idx, branch);
        events.push(TraceEvent {
            branch_point: point.id,
            time: point.time,
            scene: scene_idx,
            branch,
            cause,
            cue,
            recap,
            requested,
            error,
        });
    }

    Ok(PlaythroughTrace {
        initial_branch: first.default_branch,
        initial_cue,
        events,
    })
}

/// Parses a script: one entry per line, `default` or a 0-based branch
/// index. Blank lines and `#` comments are ignored.
pub fn parse_script(text: &str) -> Result<Vec<ScriptEntry>, SimulateError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.eq_ignore_ascii_case("default") {
            out.push(ScriptEntry::Default);
        } else {
            let idx = line.parse::<usize>().map_err(|_| SimulateError::Script {
                line: i + 1,
                message: format!("expected `default` or a branch index, got {line:?}"),
            })?;
            out.push(ScriptEntry::Choose(idx));
        }
    }
    Ok(out)
}

/// Reads a script file. A file holding a JSON trace is accepted too and
/// converted with [`PlaythroughTrace::to_script`].
pub fn load_script(path: &Path) -> Result<Vec<ScriptEntry>, SimulateError> {
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        let trace = PlaythroughTrace::from_json(&text).map_err(|e| SimulateError::Script {
            line: e.line(),
            message: e.to_string(),
        })?;
        return Ok(trace.to_script());
    }
    parse_script(&text)
}
