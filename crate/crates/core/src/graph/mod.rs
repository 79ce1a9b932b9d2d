//! The compiled branching-narrative document consumed by players.
//!
//! A [`BranchGraph`] is a single self-contained JSON file. Emission is
//! canonical: keys sorted, floats rounded to nine significant digits,
//! newline-terminated, so identical graphs give identical bytes.

mod canonical;
mod jaccard;
mod validate;

use serde::{Deserialize, Serialize};

use crate::branch_points::{BranchPoint, TimeInterval};
use crate::branches::SceneSegment;
use crate::diversity::{DiversityBreakdown, DiversityWeights, SelectionStep};
use crate::geometry::{dir_from_angles, Direction, Fov};
use crate::narration::{Focus, NarrationSlot, NavigationCue};

pub use canonical::{emit, parse, GraphError};
pub use jaccard::{jaccard_agreement, JaccardResult, DEFAULT_TOLERANCE_S};
pub use validate::{validate, validate_document, ValidationIssue};

pub const GRAPH_VERSION: &str = "branchgraph/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub duration_s: f64,
    pub fps: u32,
    pub frame_count: usize,
}

/// Parameters the graph was compiled with, kept so that every invariant can
/// be re-checked from the document alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSettings {
    pub rms_threshold: f64,
    pub min_interval_s: f64,
    pub merge_angle_deg: f64,
    pub smoothing_window: usize,
    pub fov: Fov,
    pub weights: DiversityWeights,
    pub lambda: f64,
    pub max_options: usize,
    pub words_per_second: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub frame: usize,
    pub yaw: f64,
    pub pitch: f64,
}

impl PathSample {
    pub fn direction(&self) -> Option<Direction> {
        dir_from_angles(self.yaw, self.pitch).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    /// Index among the scene's candidates before selection.
    pub candidate: usize,
    pub title: String,
    pub social_score: f64,
    /// Set diversity right after this branch was selected.
    pub selection: DiversityBreakdown,
    pub viewport: Fov,
    pub path: Vec<PathSample>,
    /// One entry per path sample.
    pub captions: Vec<Option<String>>,
    pub narration: NarrationSlot,
    pub degenerate: bool,
}

impl Branch {
    pub fn sample_at(&self, frame: usize) -> Option<&PathSample> {
        let first = self.path.first()?.frame;
        self.path.get(frame.checked_sub(first)?)
    }

    /// Mean viewing direction of the branch as yaw/pitch.
    pub fn focus(&self) -> Focus {
        let dirs: Vec<Direction> = self.path.iter().filter_map(PathSample::direction).collect();
        let d = Direction::mean(&dirs).unwrap_or_else(Direction::forward);
        Focus {
            yaw: d.yaw(),
            pitch: d.pitch(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub span: SceneSegment,
    pub title: String,
    /// Branch taken when the viewer makes no choice: the highest social score.
    pub default_branch: usize,
    pub candidate_count: usize,
    pub degenerate: bool,
    pub diversity: DiversityBreakdown,
    pub selection_trace: Vec<SelectionStep>,
    pub branches: Vec<Branch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchGraph {
    pub version: String,
    pub video: VideoMeta,
    pub settings: GraphSettings,
    pub exclusion_zones: Vec<TimeInterval>,
    pub branch_points: Vec<BranchPoint>,
    pub scenes: Vec<Scene>,
    pub cues: Vec<NavigationCue>,
}

impl BranchGraph {
    pub fn branch_point_times(&self) -> Vec<f64> {
        self.branch_points.iter().map(|p| p.time).collect()
    }

    pub fn cue(&self, scene: usize, branch: usize) -> Option<&NavigationCue> {
        self.cues
            .iter()
            .find(|c| c.scene_index == scene + 1 && c.branch_index == branch + 1)
    }

    /// Index of the scene playing at `time` seconds.
    pub fn scene_at(&self, time: f64) -> Option<usize> {
        self.scenes.iter().rposition(|s| s.span.start_s <= time)
    }
}
