//! Spatial, semantic and social diversity of branch sets, and greedy
//! selection of the ordered branch list.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::branches::CandidateBranch;
use crate::geometry::pixel_to_direction;
use crate::ingest::SaliencyFrame;

pub const DEFAULT_LAMBDA: f64 = 0.75;
pub const DEFAULT_MAX_OPTIONS: usize = 5;
const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum DiversityError {
    #[error("branches cover different frame spans")]
    SpanMismatch,
    #[error("branch is missing the embedding for frame {frame}")]
    MissingEmbedding { frame: usize },
    #[error("embedding dimensions differ at frame {frame}")]
    EmbeddingDimension { frame: usize },
    #[error("no saliency frame {frame}")]
    MissingSaliency { frame: usize },
    #[error("no candidates to select from")]
    NoCandidates,
    #[error(
        "invalid weights ({spatial}, {semantic}, {social}): must be non-negative and sum to 1"
    )]
    InvalidWeights {
        spatial: f64,
        semantic: f64,
        social: f64,
    },
    #[error("lambda must be in (0, 1], got {0}")]
    InvalidLambda(f64),
    #[error("max_options must be at least 1")]
    InvalidMaxOptions,
    #[error("score table is not square: {0}")]
    MalformedTable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiversityWeights {
    pub spatial: f64,
    pub semantic: f64,
    pub social: f64,
}

impl Default for DiversityWeights {
    fn default() -> Self {
        DiversityWeights {
            spatial: 1.0 / 3.0,
            semantic: 1.0 / 3.0,
            social: 1.0 / 3.0,
        }
    }
}

impl DiversityWeights {
    pub fn new(spatial: f64, semantic: f64, social: f64) -> Result<Self, DiversityError> {
        let w = DiversityWeights {
            spatial,
            semantic,
            social,
        };
        w.validate()?;
        Ok(w)
    }

    /// Rescales arbitrary non-negative weights to sum to one.
    pub fn normalized(spatial: f64, semantic: f64, social: f64) -> Result<Self, DiversityError> {
        let sum = spatial + semantic + social;
        let err = DiversityError::InvalidWeights {
            spatial,
            semantic,
            social,
        };
        if !(sum.is_finite() && sum > 0.0) || spatial < 0.0 || semantic < 0.0 || social < 0.0 {
            return Err(err);
        }
        DiversityWeights::new(spatial / sum, semantic / sum, social / sum)
    }

    pub fn validate(&self) -> Result<(), DiversityError> {
        let parts = [self.spatial, self.semantic, self.social];
        let ok = parts.iter().all(|w| w.is_finite() && *w >= 0.0)
            && (parts.iter().sum::<f64>() - 1.0).abs() <= WEIGHT_SUM_TOLERANCE;
        if ok {
            Ok(())
        } else {
            Err(DiversityError::InvalidWeights {
                spatial: self.spatial,
                semantic: self.semantic,
                social: self.social,
            })
        }
    }

    pub fn combine(&self, d_spa: f64, d_sem: f64, d_soc: f64) -> f64 {
        self.spatial * d_spa + self.semantic * d_sem + self.social * d_soc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiversityBreakdown {
    pub d_spa: f64,
    pub d_sem: f64,
    pub d_soc: f64,
    pub overall: f64,
}

/// Mean over frames of `0.5 * (1 - cos)` between the two viewing directions.
pub fn spatial_diversity(a: &CandidateBranch, b: &CandidateBranch) -> Result<f64, DiversityError> {
    if !a.path.same_span(&b.path) {
        return Err(DiversityError::SpanMismatch);
    }
    let dirs = a.path.directions().iter().zip(b.path.directions());
    let total: f64 = dirs
        .map(|(p, q)| 0.5 * (1.0 - p.dot(q).clamp(-1.0, 1.0)))
        .sum();
    Ok(total / a.path.len() as f64)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Mean over frames of `1 - s'` between caption embeddings, each frame
/// clamped to [0, 1].
pub fn semantic_diversity(a: &CandidateBranch, b: &CandidateBranch) -> Result<f64, DiversityError> {
    if !a.path.same_span(&b.path)
        || a.embeddings.len() != a.path.len()
        || b.embeddings.len() != b.path.len()
    {
        return Err(DiversityError::SpanMismatch);
    }
    let mut total = 0.0;
    for (i, (ea, eb)) in a.embeddings.iter().zip(&b.embeddings).enumerate() {
        let frame = a.path.start_frame() + i;
        let (Some(ea), Some(eb)) = (ea, eb) else {
            return Err(DiversityError::MissingEmbedding { frame });
        };
        if ea.len() != eb.len() {
            return Err(DiversityError::EmbeddingDimension { frame });
        }
        total += (1.0 - cosine(ea, eb)).clamp(0.0, 1.0);
    }
    Ok(total / a.path.len() as f64)
}

/// Unit directions and cos(pitch) area weights of every pixel of one grid.
struct PixelGrid {
    width: usize,
    height: usize,
    dirs: Vec<crate::geometry::Direction>,
    area: Vec<f64>,
}

impl PixelGrid {
    fn new(width: usize, height: usize) -> PixelGrid {
        let mut dirs = Vec::with_capacity(width * height);
        let mut area = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let d = pixel_to_direction(x, y, width, height).expect("pixel inside grid");
                area.push(d.pitch().to_radians().cos());
                dirs.push(d);
            }
        }
        PixelGrid {
            width,
            height,
            dirs,
            area,
        }
    }
}

/// Per-branch social score: at every frame, the cos(pitch)-weighted saliency
/// inside each branch's viewport, min-max normalized across the branches
/// (0.5 for all when they tie), averaged over frames.
///
/// `saliency` is indexed by absolute frame number.
pub fn social_scores(
    candidates: &[CandidateBranch],
    saliency: &[SaliencyFrame],
) -> Result<Vec<f64>, DiversityError> {
    let Some(first) = candidates.first() else {
        return Ok(Vec::new());
    };
    if candidates.iter().any(|c| !c.path.same_span(&first.path)) {
        return Err(DiversityError::SpanMismatch);
    }
    let mut grid: Option<PixelGrid> = None;
    let mut sums = vec![0.0; candidates.len()];
    for i in 0..first.path.len() {
        let frame_index = first.path.start_frame() + i;
        let frame = saliency
            .get(frame_index)
            .ok_or(DiversityError::MissingSaliency { frame: frame_index })?;
        if grid
            .as_ref()
            .is_none_or(|g| g.width != frame.width || g.height != frame.height)
        {
            grid = Some(PixelGrid::new(frame.width, frame.height));
        }
        let grid = grid.as_ref().unwrap();
        let tests: Vec<_> = candidates
            .iter()
            .map(|c| c.viewport_at(i).containment())
            .collect();
        let mut raw = vec![0.0; candidates.len()];
        for (p, &value) in frame.values.iter().enumerate() {
            if value <= 0.0 {
                continue;
            }
            let weighted = value * grid.area[p];
            for (r, t) in raw.iter_mut().zip(&tests) {
                if t.contains(&grid.dirs[p]) {
                    *r += weighted;
                }
            }
        }
        let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let spread = hi - lo;
        for (s, r) in sums.iter_mut().zip(&raw) {
            *s += if spread <= 1e-12 * hi.abs().max(1.0) {
                0.5
            } else {
                (r - lo) / spread
            };
        }
    }
    let n = first.path.len() as f64;
    Ok(sums.into_iter().map(|s| s / n).collect())
}

/// Precomputed metrics over one scene's candidates: pairwise spatial and
/// semantic diversity plus per-branch social scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub spatial: Vec<Vec<f64>>,
    pub semantic: Vec<Vec<f64>>,
    pub social: Vec<f64>,
}

impl ScoreTable {
    pub fn new(
        spatial: Vec<Vec<f64>>,
        semantic: Vec<Vec<f64>>,
        social: Vec<f64>,
    ) -> Result<ScoreTable, DiversityError> {
        let n = social.len();
        for (name, m) in [("spatial", &spatial), ("semantic", &semantic)] {
            if m.len() != n || m.iter().any(|row| row.len() != n) {
                return Err(DiversityError::MalformedTable(format!(
                    "{name} matrix does not match {n} candidates"
                )));
            }
        }
        Ok(ScoreTable {
            spatial,
            semantic,
            social,
        })
    }

    pub fn from_candidates(
        candidates: &[CandidateBranch],
        saliency: &[SaliencyFrame],
    ) -> Result<ScoreTable, DiversityError> {
        let n = candidates.len();
        let mut spatial = vec![vec![0.0; n]; n];
        let mut semantic = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let s = spatial_diversity(&candidates[i], &candidates[j])?;
                let m = semantic_diversity(&candidates[i], &candidates[j])?;
                spatial[i][j] = s;
                spatial[j][i] = s;
                semantic[i][j] = m;
                semantic[j][i] = m;
            }
        }
        let social = social_scores(candidates, saliency)?;
        ScoreTable::new(spatial, semantic, social)
    }

    pub fn len(&self) -> usize {
        self.social.len()
    }

    pub fn is_empty(&self) -> bool {
        self.social.is_empty()
    }
}

/// Breakdown of the set `members` (indices into `table`). Pairwise metrics
/// average over unordered pairs and are 0 for a singleton.
pub fn overall_diversity(
    table: &ScoreTable,
    members: &[usize],
    weights: &DiversityWeights,
) -> DiversityBreakdown {
    let (mut spa, mut sem, mut pairs) = (0.0, 0.0, 0usize);
    for (k, &i) in members.iter().enumerate() {
        for &j in &members[k + 1..] {
            spa += table.spatial[i][j];
            sem += table.semantic[i][j];
            pairs += 1;
        }
    }
    let (d_spa, d_sem) = if pairs == 0 {
        (0.0, 0.0)
    } else {
        (spa / pairs as f64, sem / pairs as f64)
    };
    let d_soc = if members.is_empty() {
        0.0
    } else {
        members.iter().map(|&i| table.social[i]).sum::<f64>() / members.len() as f64
    };
    DiversityBreakdown {
        d_spa,
        d_sem,
        d_soc,
        overall: weights.combine(d_spa, d_sem, d_soc),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub candidate: usize,
    /// Diversity of the selected set with this candidate added.
    pub breakdown: DiversityBreakdown,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSet {
    /// Candidate indices in selection order.
    pub selected: Vec<usize>,
    pub breakdown: DiversityBreakdown,
    pub trace: Vec<SelectionStep>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionParams {
    pub weights: DiversityWeights,
    pub lambda: f64,
    pub max_options: usize,
}

impl Default for SelectionParams {
    fn default() -> Self {
        SelectionParams {
            weights: DiversityWeights::default(),
            lambda: DEFAULT_LAMBDA,
            max_options: DEFAULT_MAX_OPTIONS,
        }
    }
}

impl SelectionParams {
    pub fn validate(&self) -> Result<(), DiversityError> {
        self.weights.validate()?;
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(DiversityError::InvalidLambda(self.lambda));
        }
        if self.max_options == 0 {
            return Err(DiversityError::InvalidMaxOptions);
        }
        Ok(())
    }
}

fn argmax_first(values: impl Iterator<Item = (usize, f64)>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best
}

/// Greedy selection: start from the most socially salient branch, then keep
/// adding whichever remaining branch maximizes the set's overall diversity.
/// Stops when the best addition would drop diversity below `lambda` times
/// the current value, when `max_options` is reached, or when candidates run
/// out. Ties go to the lowest candidate index.
pub fn select_branches(
    table: &ScoreTable,
    params: &SelectionParams,
) -> Result<BranchSet, DiversityError> {
    params.validate()?;
    let (first, _) = argmax_first(table.social.iter().copied().enumerate())
        .ok_or(DiversityError::NoCandidates)?;
    let mut selected = vec![first];
    let mut current = overall_diversity(table, &selected, &params.weights);
    let mut trace = vec![SelectionStep {
        candidate: first,
        breakdown: current,
        accepted: true,
    }];

    while selected.len() < params.max_options {
        let remaining = (0..table.len()).filter(|i| !selected.contains(i));
        let scored: Vec<(usize, DiversityBreakdown)> = remaining
            .map(|i| {
                let mut trial = selected.clone();
                trial.push(i);
                (i, overall_diversity(table, &trial, &params.weights))
            })
            .collect();
        let Some((best, _)) = argmax_first(scored.iter().map(|(i, b)| (*i, b.overall))) else {
            break;
        };
        let breakdown = scored.iter().find(|(i, _)| *i == best).unwrap().1;
        if breakdown.overall < params.lambda * current.overall {
            trace.push(SelectionStep {
                candidate: best,
                breakdown,
                accepted: false,
            });
            break;
        }
        selected.push(best);
        current = breakdown;
        trace.push(SelectionStep {
            candidate: best,
            breakdown,
            accepted: true,
        });
    }
    Ok(BranchSet {
        selected,
        breakdown: current,
        trace,
    })
}
