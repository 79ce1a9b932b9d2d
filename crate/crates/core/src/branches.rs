//! Candidate branch generation between consecutive branching points.
//!
//! Per frame, salient regions become viewing directions which are clustered
//! to remove near-duplicates. Directions are linked across frames by nearest
//! angle, starting from the frame with the most directions, then smoothed.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::branch_points::BranchPoint;
use crate::geometry::{
    angular_distance, dir_from_angles, image_point_to_direction, smooth_path, Direction, Fov,
    GeometryError, ViewingPath, Viewport,
};
use crate::ingest::{EmbeddingRecord, ProjectInputs, SaliencyFrame};

pub const DEFAULT_REGION_THRESHOLD: f64 = 0.5;
pub const DEFAULT_MIN_AREA_FRACTION: f64 = 0.001;
pub const DEFAULT_MERGE_ANGLE_DEG: f64 = 30.0;
pub const DEFAULT_SMOOTHING_WINDOW: usize = 5;
/// Paths closer than this at every frame are duplicates.
pub const DUPLICATE_PATH_DEG: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum BranchError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("segment frames {first}..={last} outside the {available}-frame input")]
    SegmentOutOfRange {
        first: usize,
        last: usize,
        available: usize,
    },
    #[error("segment has an empty frame range")]
    EmptySegment,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorParams {
    pub region_threshold: f64,
    pub min_area_fraction: f64,
    pub merge_angle_deg: f64,
    pub smoothing_window: usize,
    pub fov: Fov,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            region_threshold: DEFAULT_REGION_THRESHOLD,
            min_area_fraction: DEFAULT_MIN_AREA_FRACTION,
            merge_angle_deg: DEFAULT_MERGE_ANGLE_DEG,
            smoothing_window: DEFAULT_SMOOTHING_WINDOW,
            fov: Fov::default(),
        }
    }
}

/// The stretch of video between two branching points (or playback start and
/// video end).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSegment {
    pub index: usize,
    /// Branching point that opens the segment; `None` for playback start.
    pub start_point: Option<usize>,
    /// Branching point that closes the segment; `None` for video end.
    pub end_point: Option<usize>,
    pub first_frame: usize,
    pub last_frame: usize,
    pub start_s: f64,
    pub end_s: f64,
}

impl SceneSegment {
    pub fn frame_count(&self) -> usize {
        self.last_frame + 1 - self.first_frame
    }

    pub fn frames(&self) -> std::ops::RangeInclusive<usize> {
        self.first_frame..=self.last_frame
    }
}

/// Splits the frame grid at the branching points. Frame `i` shows second `i`,
/// so a scene spanning `[a, b)` seconds owns frames `ceil(a)..ceil(b)`.
/// Points that would leave an empty scene are skipped.
pub fn segments_from_points(
    points: &[BranchPoint],
    frame_count: usize,
    duration_s: f64,
) -> Vec<SceneSegment> {
    let mut segments = Vec::new();
    let mut start: (Option<usize>, f64, usize) = (None, 0.0, 0);
    for p in points {
        let frame = p.time.ceil() as usize;
        if frame <= start.2 || frame >= frame_count {
            continue;
        }
        segments.push(SceneSegment {
            index: segments.len(),
            start_point: start.0,
            end_point: Some(p.id),
            first_frame: start.2,
            last_frame: frame - 1,
            start_s: start.1,
            end_s: p.time,
        });
        start = (Some(p.id), p.time, frame);
    }
    if frame_count > start.2 {
        segments.push(SceneSegment {
            index: segments.len(),
            start_point: start.0,
            end_point: None,
            first_frame: start.2,
            last_frame: frame_count - 1,
            start_s: start.1,
            end_s: duration_s,
        });
    }
    segments
}

/// Centroids of salient regions in one saliency frame.
///
/// Pixels at or above `region_threshold * max` form regions under
/// 4-connectivity, wrapping horizontally across the +/-180 yaw seam. Regions
/// smaller than `min_area_fraction` of the frame are dropped; each remaining
/// region yields its saliency-weighted centroid.
pub fn extract_viewing_directions(
    frame: &SaliencyFrame,
    region_threshold: f64,
    min_area_fraction: f64,
) -> Vec<Direction> {
    let (w, h) = (frame.width, frame.height);
    let max = frame.max();
    if max <= 0.0 || w == 0 || h == 0 {
        return Vec::new();
    }
    let cutoff = region_threshold * max;
    let hot = |i: usize| frame.values[i] > 0.0 && frame.values[i] >= cutoff;
    let min_area = min_area_fraction * (w * h) as f64;

    let mut visited = vec![false; w * h];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for seed in 0..w * h {
        if visited[seed] || !hot(seed) {
            continue;
        }
        visited[seed] = true;
        // Unwrapped x lets a region straddling the seam average correctly.
        queue.push_back((seed % w, seed / w, (seed % w) as i64));
        let (mut area, mut sw, mut sx, mut sy) = (0usize, 0.0, 0.0, 0.0);
        while let Some((x, y, ux)) = queue.pop_front() {
            let v = frame.get(x, y);
            area += 1;
            sw += v;
            sx += v * ux as f64;
            sy += v * y as f64;
            let left = ((x + w - 1) % w, y, ux - 1);
            let right = ((x + 1) % w, y, ux + 1);
            let mut neighbors = vec![left, right];
            if y > 0 {
                neighbors.push((x, y - 1, ux));
            }
            if y + 1 < h {
                neighbors.push((x, y + 1, ux));
            }
            for (nx, ny, nux) in neighbors {
                let idx = ny * w + nx;
                if !visited[idx] && hot(idx) {
                    visited[idx] = true;
                    queue.push_back((nx, ny, nux));
                }
            }
        }
        if (area as f64) < min_area || sw <= 0.0 {
            continue;
        }
        let cx = (sx / sw + 0.5).rem_euclid(w as f64) - 0.5;
        let cy = sy / sw;
        if let Ok(d) = image_point_to_direction(cx, cy, w, h) {
            out.push(d);
        }
    }
    out
}

/// Agglomerative clustering with centroid linkage on the sphere.
///
/// The closest pair of clusters (by centroid angle) is merged while that
/// angle is at most `merge_angle`. A centroid is the renormalized mean of its
/// members. Output is ordered by each cluster's lowest input index.
pub fn cluster_directions(dirs: &[Direction], merge_angle: f64) -> Vec<Direction> {
    struct Cluster {
        sum: [f64; 3],
        centroid: Direction,
    }
    let mut clusters: Vec<Cluster> = dirs
        .iter()
        .map(|d| Cluster {
            sum: d.as_array(),
            centroid: *d,
        })
        .collect();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let dist = angular_distance(&clusters[i].centroid, &clusters[j].centroid);
                if best.is_none_or(|(b, _, _)| dist < b) {
                    best = Some((dist, i, j));
                }
            }
        }
        match best {
            Some((dist, i, j)) if dist <= merge_angle => {
                let other = clusters.remove(j);
                let c = &mut clusters[i];
                for k in 0..3 {
                    c.sum[k] += other.sum[k];
                }
                if let Some(centroid) = Direction::from_vector(c.sum[0], c.sum[1], c.sum[2]) {
                    c.centroid = centroid;
                }
            }
            _ => break,
        }
    }
    clusters.into_iter().map(|c| c.centroid).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkedPaths {
    /// Index of the seed frame within the segment.
    pub seed_frame: usize,
    /// Surviving paths with the seed direction index each grew from.
    pub paths: Vec<(usize, ViewingPath)>,
    /// True when no frame had any direction and a forward-facing fallback
    /// path was produced.
    pub degenerate: bool,
}

fn nearest(from: &Direction, options: &[Direction]) -> Option<Direction> {
    let mut best: Option<(f64, Direction)> = None;
    for d in options {
        let dist = angular_distance(from, d);
        if best.is_none_or(|(b, _)| dist < b) {
            best = Some((dist, *d));
        }
    }
    best.map(|(_, d)| d)
}

/// Links per-frame directions into paths spanning the whole segment.
///
/// `per_frame[i]` holds the directions of frame `start_frame + i`.
pub fn link_paths(
    per_frame: &[Vec<Direction>],
    start_frame: usize,
) -> Result<LinkedPaths, BranchError> {
    if per_frame.is_empty() {
        return Err(BranchError::EmptySegment);
    }
    let n = per_frame.len();
    let mut seed_frame = 0;
    for (i, dirs) in per_frame.iter().enumerate() {
        if dirs.len() > per_frame[seed_frame].len() {
            seed_frame = i;
        }
    }
    let seeds = &per_frame[seed_frame];
    if seeds.is_empty() {
        let fallback = dir_from_angles(0.0, 0.0)?;
        return Ok(LinkedPaths {
            seed_frame,
            paths: vec![(0, ViewingPath::constant(start_frame, n, fallback)?)],
            degenerate: true,
        });
    }

    let mut paths: Vec<(usize, ViewingPath)> = Vec::new();
    for (seed_index, seed) in seeds.iter().enumerate() {
        let mut track = vec![*seed; n];
        for f in seed_frame + 1..n {
            track[f] = nearest(&track[f - 1], &per_frame[f]).unwrap_or(track[f - 1]);
        }
        for f in (0..seed_frame).rev() {
            track[f] = nearest(&track[f + 1], &per_frame[f]).unwrap_or(track[f + 1]);
        }
        let duplicate = paths.iter().any(|(_, kept)| {
            kept.directions()
                .iter()
                .zip(&track)
                .all(|(a, b)| angular_distance(a, b) < DUPLICATE_PATH_DEG)
        });
        if !duplicate {
            paths.push((seed_index, ViewingPath::new(start_frame, track)?));
        }
    }
    Ok(LinkedPaths {
        seed_frame,
        paths,
        degenerate: false,
    })
}

/// A smoothed viewing path with the per-frame viewport content attached.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateBranch {
    pub seed_index: usize,
    pub path: ViewingPath,
    pub fov: Fov,
    pub captions: Vec<Option<String>>,
    pub embeddings: Vec<Option<Vec<f64>>>,
    pub degenerate: bool,
}

impl CandidateBranch {
    /// A branch with no captions or embeddings attached.
    pub fn bare(path: ViewingPath) -> CandidateBranch {
        let n = path.len();
        CandidateBranch {
            seed_index: 0,
            path,
            fov: Fov::default(),
            captions: vec![None; n],
            embeddings: vec![None; n],
            degenerate: false,
        }
    }

    pub fn viewport_at(&self, i: usize) -> Viewport {
        Viewport::new(self.path.directions()[i], self.fov)
    }

    pub fn viewport_track(&self) -> Vec<Viewport> {
        (0..self.path.len()).map(|i| self.viewport_at(i)).collect()
    }

    /// Renormalized mean direction over the whole path.
    pub fn mean_direction(&self) -> Direction {
        Direction::mean(self.path.directions()).unwrap_or(self.path.directions()[0])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub segment: SceneSegment,
    pub direction_counts: Vec<usize>,
    pub seed_frame: usize,
    pub candidates: Vec<CandidateBranch>,
    pub degenerate: bool,
}

/// Record at `frame` whose direction is closest to `d`; first one on ties.
fn nearest_record<'a>(
    records: &[&'a EmbeddingRecord],
    d: &Direction,
) -> Option<&'a EmbeddingRecord> {
    let mut best: Option<(f64, &EmbeddingRecord)> = None;
    for rec in records {
        let Ok(rd) = dir_from_angles(rec.yaw, rec.pitch) else {
            continue;
        };
        let dist = angular_distance(d, &rd);
        if best.is_none_or(|(b, _)| dist < b) {
            best = Some((dist, rec));
        }
    }
    best.map(|(_, r)| r)
}

pub fn per_frame_directions(
    segment: &SceneSegment,
    inputs: &ProjectInputs,
    params: &GeneratorParams,
) -> Result<Vec<Vec<Direction>>, BranchError> {
    if segment.last_frame < segment.first_frame {
        return Err(BranchError::EmptySegment);
    }
    if segment.last_frame >= inputs.saliency.len() {
        return Err(BranchError::SegmentOutOfRange {
            first: segment.first_frame,
            last: segment.last_frame,
            available: inputs.saliency.len(),
        });
    }
    Ok(segment
        .frames()
        .map(|f| {
            let dirs = extract_viewing_directions(
                &inputs.saliency[f],
                params.region_threshold,
                params.min_area_fraction,
            );
            cluster_directions(&dirs, params.merge_angle_deg)
        })
        .collect())
}

pub fn build_candidates(
    segment: &SceneSegment,
    inputs: &ProjectInputs,
    params: &GeneratorParams,
) -> Result<CandidateSet, BranchError> {
    let per_frame = per_frame_directions(segment, inputs, params)?;
    let linked = link_paths(&per_frame, segment.first_frame)?;
    let by_frame: BTreeMap<usize, Vec<&EmbeddingRecord>> = inputs.embeddings_by_frame();

    let mut candidates = Vec::with_capacity(linked.paths.len());
    for (seed_index, raw) in &linked.paths {
        let path = smooth_path(raw, params.smoothing_window)?;
        let mut captions = Vec::with_capacity(path.len());
        let mut embeddings = Vec::with_capacity(path.len());
        for (i, d) in path.directions().iter().enumerate() {
            let rec = by_frame
                .get(&(segment.first_frame + i))
                .and_then(|recs| nearest_record(recs, d));
            captions.push(rec.and_then(|r| r.caption.clone()));
            embeddings.push(rec.map(|r| r.vector.clone()));
        }
        candidates.push(CandidateBranch {
            seed_index: *seed_index,
            path,
            fov: params.fov,
            captions,
            embeddings,
            degenerate: linked.degenerate,
        });
    }
    Ok(CandidateSet {
        segment: segment.clone(),
        direction_counts: per_frame.iter().map(Vec::len).collect(),
        seed_frame: segment.first_frame + linked.seed_frame,
        candidates,
        degenerate: linked.degenerate,
    })
}
