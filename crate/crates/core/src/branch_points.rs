//! Placement of branching points: scene cuts moved out of speech and loud
//! music, then thinned to a minimum spacing.

use serde::{Deserialize, Serialize};

use crate::ingest::{LoudnessSeries, TranscriptSegment};

pub const DEFAULT_RMS_THRESHOLD: f64 = 0.8;
pub const DEFAULT_MIN_INTERVAL_S: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneKind {
    Speech,
    LoudMusic,
}

/// A time span where branching is not allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeInterval {
    pub start: f64,
    pub end: f64,
    pub kind: ZoneKind,
}

impl TimeInterval {
    pub fn strictly_contains(&self, t: f64) -> bool {
        self.start < t && t < self.end
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointSource {
    SceneCut,
    Merged,
    Shifted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub id: usize,
    pub time: f64,
    pub source: PointSource,
}

fn coalesce(mut spans: Vec<(f64, f64)>, kind: ZoneKind) -> Vec<TimeInterval> {
    spans.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out: Vec<TimeInterval> = Vec::new();
    for (start, end) in spans {
        if start >= end {
            continue;
        }
        match out.last_mut() {
            Some(last) if start <= last.end => last.end = last.end.max(end),
            _ => out.push(TimeInterval { start, end, kind }),
        }
    }
    out
}

/// Speech segments plus maximal runs of loudness above `rms_threshold`.
/// Each kind is coalesced separately; the result is sorted by start time.
pub fn exclusion_zones(
    transcript: &[TranscriptSegment],
    loudness: &LoudnessSeries,
    rms_threshold: f64,
) -> Vec<TimeInterval> {
    let speech = coalesce(
        transcript.iter().map(|s| (s.start, s.end)).collect(),
        ZoneKind::Speech,
    );

    let step = 1.0 / loudness.sample_rate;
    let mut runs = Vec::new();
    let mut run_start: Option<usize> = None;
    for (i, &v) in loudness.values.iter().enumerate() {
        match (v > rms_threshold, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                runs.push((loudness.time_of(s), loudness.time_of(i)));
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = run_start {
        let last = loudness.values.len() - 1;
        runs.push((loudness.time_of(s), loudness.time_of(last) + step));
    }
    let loud = coalesce(runs, ZoneKind::LoudMusic);

    let mut zones: Vec<TimeInterval> = speech.into_iter().chain(loud).collect();
    zones.sort_by(|a, b| {
        a.start
            .total_cmp(&b.start)
            .then(a.end.total_cmp(&b.end))
            .then(a.kind.cmp(&b.kind))
    });
    zones
}

/// Moves `t` to the end of any zone strictly containing it, repeating until
/// it is clear of every zone. Returns the new time and whether it moved.
fn shift_out_of_zones(mut t: f64, zones: &[TimeInterval]) -> (f64, bool) {
    let mut moved = false;
    while let Some(zone) = zones.iter().find(|z| z.strictly_contains(t)) {
        t = zone.end;
        moved = true;
    }
    (t, moved)
}

/// Final branching points from scene-start candidates.
///
/// Candidates inside an exclusion zone move to the zone end. The sweep then
/// keeps a candidate only if it lies more than `min_interval` after the last
/// kept one; later candidates are merged into the earlier point. Time 0 is
/// playback start and never a branching point.
pub fn detect_branching_points(
    scene_boundaries: &[f64],
    zones: &[TimeInterval],
    min_interval: f64,
) -> Vec<BranchPoint> {
    let mut candidates: Vec<(f64, bool)> = scene_boundaries
        .iter()
        .filter(|&&t| t > 0.0)
        .map(|&t| shift_out_of_zones(t, zones))
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut points: Vec<BranchPoint> = Vec::new();
    for (time, shifted) in candidates {
        match points.last_mut() {
            Some(last) if time - last.time <= min_interval => {
                if last.source == PointSource::SceneCut {
                    last.source = PointSource::Merged;
                }
            }
            _ => points.push(BranchPoint {
                id: points.len(),
                time,
                source: if shifted {
                    PointSource::Shifted
                } else {
                    PointSource::SceneCut
                },
            }),
        }
    }
    points
}
