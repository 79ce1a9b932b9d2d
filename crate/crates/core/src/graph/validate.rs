use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{BranchGraph, DiversityBreakdown, GRAPH_VERSION};
use crate::diversity::DiversityWeights;
use crate::narration::{word_budget, word_count};

/// Documents carry nine significant digits, so derived quantities are
/// compared with this slack.
const DOC_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    /// Location inside the document, e.g. `scenes[1].branches[0].path`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

struct Issues(Vec<ValidationIssue>);

impl Issues {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(ValidationIssue {
            path: path.into(),
            message: message.into(),
        });
    }

    fn check(&mut self, ok: bool, path: impl Into<String>, message: impl Into<String>) {
        if !ok {
            self.push(path, message);
        }
    }
}

fn weights_ok(w: &DiversityWeights) -> bool {
    let parts = [w.spatial, w.semantic, w.social];
    parts.iter().all(|p| p.is_finite() && *p >= 0.0)
        && (parts.iter().sum::<f64>() - 1.0).abs() <= DOC_TOLERANCE
}

fn breakdown_ok(b: &DiversityBreakdown, w: &DiversityWeights) -> bool {
    let in_unit = |v: f64| (-DOC_TOLERANCE..=1.0 + DOC_TOLERANCE).contains(&v);
    in_unit(b.d_spa)
        && in_unit(b.d_sem)
        && in_unit(b.d_soc)
        && (w.combine(b.d_spa, b.d_sem, b.d_soc) - b.overall).abs() <= DOC_TOLERANCE
}

/// Checks every structural invariant; an empty list means the graph is valid.
pub fn validate(g: &BranchGraph) -> Vec<ValidationIssue> {
    let mut out = Issues(Vec::new());
    let s = &g.settings;

    out.check(
        g.version == GRAPH_VERSION,
        "version",
        format!(
            "unsupported version {:?}, expected {GRAPH_VERSION:?}",
            g.version
        ),
    );
    out.check(g.video.fps == 1, "video.fps", "fps must be 1");
    out.check(g.video.frame_count > 0, "video.frame_count", "no frames");
    out.check(
        g.video.duration_s.is_finite() && g.video.duration_s > 0.0,
        "video.duration_s",
        "duration must be positive",
    );

    out.check(
        weights_ok(&s.weights),
        "settings.weights",
        "weights must be non-negative and sum to 1",
    );
    out.check(
        s.lambda > 0.0 && s.lambda <= 1.0,
        "settings.lambda",
        "lambda must be in (0, 1]",
    );
    out.check(
        s.max_options >= 1,
        "settings.max_options",
        "max_options must be at least 1",
    );
    out.check(
        s.smoothing_window % 2 == 1,
        "settings.smoothing_window",
        "smoothing window must be odd",
    );
    out.check(
        s.fov.h_fov > 0.0 && s.fov.h_fov <= 360.0 && s.fov.v_fov > 0.0 && s.fov.v_fov <= 180.0,
        "settings.fov",
        "field of view out of range",
    );

    for (i, z) in g.exclusion_zones.iter().enumerate() {
        out.check(
            z.start < z.end,
            format!("exclusion_zones[{i}]"),
            "start must precede end",
        );
    }

    let ids: BTreeSet<usize> = g.branch_points.iter().map(|p| p.id).collect();
    for (i, p) in g.branch_points.iter().enumerate() {
        let path = format!("branch_points[{i}]");
        out.check(p.id == i, &path, format!("id {} out of order", p.id));
        out.check(
            p.time.is_finite() && p.time > 0.0 && p.time < g.video.duration_s,
            &path,
            format!("time {} outside the video", p.time),
        );
        if i > 0 {
            let gap = p.time - g.branch_points[i - 1].time;
            out.check(
                gap > s.min_interval_s,
                &path,
                format!(
                    "only {gap} s after the previous point (minimum {})",
                    s.min_interval_s
                ),
            );
        }
        if let Some(z) = g
            .exclusion_zones
            .iter()
            .find(|z| z.strictly_contains(p.time))
        {
            out.push(
                &path,
                format!(
                    "time {} lies inside exclusion zone [{}, {}]",
                    p.time, z.start, z.end
                ),
            );
        }
    }

    if g.scenes.is_empty() {
        out.push("scenes", "no scenes");
    }
    let mut next_frame = 0usize;
    for (si, scene) in g.scenes.iter().enumerate() {
        let sp = format!("scenes[{si}]");
        let span = &scene.span;
        out.check(
            span.index == si,
            format!("{sp}.span.index"),
            "index out of order",
        );
        out.check(
            span.first_frame == next_frame && span.first_frame <= span.last_frame,
            format!("{sp}.span"),
            format!(
                "frames {}..={} do not continue from frame {next_frame}",
                span.first_frame, span.last_frame
            ),
        );
        next_frame = span.last_frame + 1;

        for (field, id) in [
            ("start_point", span.start_point),
            ("end_point", span.end_point),
        ] {
            if let Some(id) = id {
                if !ids.contains(&id) {
                    out.push(
                        format!("{sp}.span.{field}"),
                        format!("branch point id {id} does not exist"),
                    );
                }
            }
        }
        match (si, span.start_point) {
            (0, Some(_)) => out.push(
                format!("{sp}.span.start_point"),
                "first scene must start at playback start",
            ),
            (0, None) => {}
            (_, None) => out.push(
                format!("{sp}.span.start_point"),
                "scene has no opening branch point",
            ),
            (_, Some(id)) => {
                if let Some(p) = g.branch_points.iter().find(|p| p.id == id) {
                    out.check(
                        (p.time - span.start_s).abs() <= DOC_TOLERANCE,
                        format!("{sp}.span.start_s"),
                        "does not match its branch point time",
                    );
                }
            }
        }

        let n = scene.branches.len();
        out.check(n > 0, format!("{sp}.branches"), "scene has no branches");
        out.check(
            n <= s.max_options,
            format!("{sp}.branches"),
            format!("{n} branches exceed max_options {}", s.max_options),
        );
        if scene.default_branch >= n {
            out.push(
                format!("{sp}.default_branch"),
                format!(
                    "default_branch {} out of range for {n} branches",
                    scene.default_branch
                ),
            );
        } else {
            let best = scene.branches.iter().enumerate().fold(0, |b, (i, br)| {
                if br.social_score > scene.branches[b].social_score {
                    i
                } else {
                    b
                }
            });
            out.check(
                best == scene.default_branch,
                format!("{sp}.default_branch"),
                format!("branch {best} has the highest social score"),
            );
        }
        out.check(
            breakdown_ok(&scene.diversity, &s.weights),
            format!("{sp}.diversity"),
            "breakdown inconsistent with weights",
        );

        let frames = span.last_frame.saturating_sub(span.first_frame) + 1;
        for (bi, br) in scene.branches.iter().enumerate() {
            let bp = format!("{sp}.branches[{bi}]");
            if br.path.len() != frames {
                out.push(
                    format!("{bp}.path"),
                    format!("{} samples for {frames} frames", br.path.len()),
                );
            }
            if let Some((k, sample)) = br
                .path
                .iter()
                .enumerate()
                .find(|(k, p)| p.frame != span.first_frame + k)
            {
                out.push(
                    format!("{bp}.path[{k}]"),
                    format!(
                        "missing frame {} (found {})",
                        span.first_frame + k,
                        sample.frame
                    ),
                );
            }
            if br
                .path
                .iter()
                .any(|p| !(-180.0..=180.0).contains(&p.yaw) || !(-90.0..=90.0).contains(&p.pitch))
            {
                out.push(format!("{bp}.path"), "yaw or pitch out of range");
            }
            out.check(
                br.captions.len() == br.path.len(),
                format!("{bp}.captions"),
                "one caption slot per path sample required",
            );
            out.check(
                (0.0..=1.0).contains(&br.social_score),
                format!("{bp}.social_score"),
                "social score outside [0, 1]",
            );
            out.check(
                breakdown_ok(&br.selection, &s.weights),
                format!("{bp}.selection"),
                "breakdown inconsistent with weights",
            );

            let slot = &br.narration;
            let np = format!("{bp}.narration");
            out.check(
                slot.start_s >= span.start_s - DOC_TOLERANCE
                    && slot.end_s <= span.end_s + DOC_TOLERANCE
                    && slot.start_s <= slot.end_s,
                &np,
                "slot lies outside its scene",
            );
            if slot.unplaceable {
                out.check(
                    slot.word_budget == 0,
                    &np,
                    "unplaceable slot must have zero budget",
                );
            } else {
                out.check(
                    slot.word_budget == word_budget(slot.duration(), s.words_per_second),
                    &np,
                    "word budget does not match slot duration",
                );
            }
            if let Some(text) = &slot.text {
                out.check(
                    word_count(text) <= slot.word_budget,
                    &np,
                    format!(
                        "{} words exceed budget {}",
                        word_count(text),
                        slot.word_budget
                    ),
                );
            }
        }
    }
    if !g.scenes.is_empty() && next_frame != g.video.frame_count {
        out.push(
            "scenes",
            format!(
                "scenes cover {next_frame} of {} frames",
                g.video.frame_count
            ),
        );
    }

    let mut seen = BTreeSet::new();
    for (ci, cue) in g.cues.iter().enumerate() {
        let cp = format!("cues[{ci}]");
        if !seen.insert((cue.scene_index, cue.branch_index)) {
            out.push(&cp, "duplicate cue");
            continue;
        }
        let Some(scene) = cue.scene_index.checked_sub(1).and_then(|i| g.scenes.get(i)) else {
            out.push(&cp, format!("scene {} does not exist", cue.scene_index));
            continue;
        };
        let Some(branch) = cue
            .branch_index
            .checked_sub(1)
            .and_then(|i| scene.branches.get(i))
        else {
            out.push(&cp, format!("branch {} does not exist", cue.branch_index));
            continue;
        };
        out.check(cue.scene_count == g.scenes.len(), &cp, "wrong scene count");
        out.check(
            cue.branch_count == scene.branches.len(),
            &cp,
            "wrong branch count",
        );
        out.check(
            cue.scene_title == scene.title,
            &cp,
            "scene title differs from scene",
        );
        out.check(
            cue.branch_title == branch.title,
            &cp,
            "branch title differs from branch",
        );
        let expected_recap = cue
            .scene_index
            .checked_sub(2)
            .map(|p| g.scenes[p].title.clone());
        out.check(
            cue.recap == expected_recap,
            &cp,
            "recap must name the previous scene",
        );
    }
    let total: usize = g.scenes.iter().map(|s| s.branches.len()).sum();
    out.check(
        seen.len() == total,
        "cues",
        format!("{} cues for {total} branches", seen.len()),
    );

    out.0
}

/// Parses and validates a document.
pub fn validate_document(text: &str) -> Result<BranchGraph, Vec<ValidationIssue>> {
    let graph = super::parse(text).map_err(|e| {
        vec![ValidationIssue {
            path: "$".into(),
            message: e.to_string(),
        }]
    })?;
    let issues = validate(&graph);
    if issues.is_empty() {
        Ok(graph)
    } else {
        Err(issues)
    }
}
