//! End-to-end compilation from project inputs to a [`BranchGraph`].

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::branch_points::{
    detect_branching_points, exclusion_zones, BranchPoint, DEFAULT_MIN_INTERVAL_S,
    DEFAULT_RMS_THRESHOLD,
};
use crate::branches::{
    build_candidates, segments_from_points, BranchError, GeneratorParams, DEFAULT_MERGE_ANGLE_DEG,
    DEFAULT_MIN_AREA_FRACTION, DEFAULT_REGION_THRESHOLD, DEFAULT_SMOOTHING_WINDOW,
};
use crate::diversity::{
    select_branches, DiversityError, DiversityWeights, ScoreTable, SelectionParams, SelectionStep,
    DEFAULT_LAMBDA, DEFAULT_MAX_OPTIONS,
};
use crate::geometry::{Fov, DEFAULT_H_FOV, DEFAULT_V_FOV};
use crate::graph::{
    Branch, BranchGraph, GraphSettings, PathSample, Scene, VideoMeta, GRAPH_VERSION,
};
use crate::ingest::{detect_scene_boundaries, IngestError, ProjectInputs, DEFAULT_SCENE_THRESHOLD};
use crate::narration::{
    fill_descriptions, narration_slot, placeholder_branch_title, placeholder_scene_title,
    plan_cues, DescriptionProvider, FileProvider, FillReport, ProviderError, RemoteProvider,
    StubProvider, DEFAULT_WORDS_PER_SECOND,
};

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("branch generation: {0}")]
    Branch(#[from] BranchError),
    #[error("diversity: {0}")]
    Diversity(#[from] DiversityError),
    #[error("provider: {0}")]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    /// Leave placeholder titles and no narration text.
    None,
    #[default]
    Stub,
    File,
    Remote,
}

/// Compile parameters. Every field defaults to the reference configuration,
/// so an empty config file reproduces it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompileConfig {
    pub rms_threshold: f64,
    pub min_interval_s: f64,
    pub merge_angle_deg: f64,
    pub smoothing_window: usize,
    pub h_fov: f64,
    pub v_fov: f64,
    pub region_threshold: f64,
    pub min_area_fraction: f64,
    pub scene_threshold: f64,
    /// Relative weights; rescaled to sum to one.
    pub w_spa: f64,
    pub w_sem: f64,
    pub w_soc: f64,
    pub lambda: f64,
    pub max_options: usize,
    pub words_per_second: f64,
    pub provider: ProviderKind,
    /// Pre-authored texts for the file provider.
    pub provider_file: Option<PathBuf>,
    /// Directive lines sent with every description request.
    pub directives: Option<PathBuf>,
    /// Worker threads; 0 picks one per core. Output does not depend on it.
    pub jobs: usize,
}

impl Default for CompileConfig {
    fn default() -> Self {
        CompileConfig {
            rms_threshold: DEFAULT_RMS_THRESHOLD,
            min_interval_s: DEFAULT_MIN_INTERVAL_S,
            merge_angle_deg: DEFAULT_MERGE_ANGLE_DEG,
            smoothing_window: DEFAULT_SMOOTHING_WINDOW,
            h_fov: DEFAULT_H_FOV,
            v_fov: DEFAULT_V_FOV,
            region_threshold: DEFAULT_REGION_THRESHOLD,
            min_area_fraction: DEFAULT_MIN_AREA_FRACTION,
            scene_threshold: DEFAULT_SCENE_THRESHOLD,
            w_spa: 1.0 / 3.0,
            w_sem: 1.0 / 3.0,
            w_soc: 1.0 / 3.0,
            lambda: DEFAULT_LAMBDA,
            max_options: DEFAULT_MAX_OPTIONS,
            words_per_second: DEFAULT_WORDS_PER_SECOND,
            provider: ProviderKind::Stub,
            provider_file: None,
            directives: None,
            jobs: 0,
        }
    }
}

fn require(ok: bool, msg: &str) -> Result<(), CompileError> {
    if ok {
        Ok(())
    } else {
        Err(CompileError::Config(msg.to_string()))
    }
}

impl CompileConfig {
    pub fn from_toml(text: &str) -> Result<CompileConfig, CompileError> {
        let config: CompileConfig =
            toml::from_str(text).map_err(|e| CompileError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Loads a config file; relative provider paths resolve against its directory.
    pub fn load(path: &Path) -> Result<CompileConfig, CompileError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CompileError::Config(format!("{}: {e}", path.display())))?;
        let mut config = CompileConfig::from_toml(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for p in [&mut config.provider_file, &mut config.directives]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CompileError> {
        require(
            (0.0..=1.0).contains(&self.rms_threshold),
            "rms_threshold must be in [0, 1]",
        )?;
        require(
            self.min_interval_s.is_finite() && self.min_interval_s >= 0.0,
            "min_interval_s must be non-negative",
        )?;
        require(
            self.merge_angle_deg > 0.0 && self.merge_angle_deg <= 180.0,
            "merge_angle_deg must be in (0, 180]",
        )?;
        require(
            self.smoothing_window % 2 == 1,
            "smoothing_window must be odd and at least 1",
        )?;
        Fov::new(self.h_fov, self.v_fov).map_err(|e| CompileError::Config(e.to_string()))?;
        require(
            self.region_threshold > 0.0 && self.region_threshold <= 1.0,
            "region_threshold must be in (0, 1]",
        )?;
        require(
            (0.0..1.0).contains(&self.min_area_fraction),
            "min_area_fraction must be in [0, 1)",
        )?;
        require(
            self.scene_threshold > 0.0 && self.scene_threshold <= 1.0,
            "scene_threshold must be in (0, 1]",
        )?;
        self.weights()?;
        require(
            self.lambda > 0.0 && self.lambda <= 1.0,
            "lambda must be in (0, 1]",
        )?;
        require(self.max_options >= 1, "max_options must be at least 1")?;
        require(
            self.words_per_second.is_finite() && self.words_per_second > 0.0,
            "words_per_second must be positive",
        )?;
        require(
            self.provider != ProviderKind::File || self.provider_file.is_some(),
            "provider = \"file\" needs provider_file",
        )?;
        Ok(())
    }

    pub fn weights(&self) -> Result<DiversityWeights, CompileError> {
        DiversityWeights::normalized(self.w_spa, self.w_sem, self.w_soc)
            .map_err(|e| CompileError::Config(e.to_string()))
    }

    pub fn fov(&self) -> Fov {
        Fov {
            h_fov: self.h_fov,
            v_fov: self.v_fov,
        }
    }

    pub fn generator_params(&self) -> GeneratorParams {
        GeneratorParams {
            region_threshold: self.region_threshold,
            min_area_fraction: self.min_area_fraction,
            merge_angle_deg: self.merge_angle_deg,
            smoothing_window: self.smoothing_window,
            fov: self.fov(),
        }
    }

    pub fn selection_params(&self) -> Result<SelectionParams, CompileError> {
        Ok(SelectionParams {
            weights: self.weights()?,
            lambda: self.lambda,
            max_options: self.max_options,
        })
    }

    /// The provider this config selects, or `None` for [`ProviderKind::None`].
    pub fn make_provider(&self) -> Result<Option<Box<dyn DescriptionProvider>>, CompileError> {
        Ok(match self.provider {
            ProviderKind::None => None,
            ProviderKind::Stub => Some(Box::new(StubProvider)),
            ProviderKind::File => {
                let path = self
                    .provider_file
                    .as_ref()
                    .ok_or_else(|| CompileError::Config("provider_file missing".into()))?;
                Some(Box::new(FileProvider::load(path)?))
            }
            ProviderKind::Remote => Some(Box::new(RemoteProvider::from_env()?)),
        })
    }

    pub fn load_directives(&self) -> Result<Vec<String>, CompileError> {
        match &self.directives {
            None => Ok(Vec::new()),
            Some(p) => crate::narration::load_directives(p)
                .map_err(|e| CompileError::Config(format!("directives {}: {e}", p.display()))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneReport {
    pub index: usize,
    pub first_frame: usize,
    pub last_frame: usize,
    pub seed_frame: usize,
    pub candidate_count: usize,
    pub selected: Vec<usize>,
    pub degenerate: bool,
    pub selection_trace: Vec<SelectionStep>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CompileReport {
    pub scene_boundaries: Vec<f64>,
    pub branch_points: Vec<f64>,
    pub scenes: Vec<SceneReport>,
    pub warnings: Vec<String>,
    pub descriptions: Option<FillReport>,
}

impl CompileReport {
    pub fn provider_warnings(&self) -> bool {
        self.descriptions
            .as_ref()
            .is_some_and(FillReport::has_warnings)
    }
}

#[derive(Debug, Clone)]
pub struct CompileOutput {
    pub graph: BranchGraph,
    pub report: CompileReport,
}

fn build_scene(
    segment: &crate::branches::SceneSegment,
    inputs: &ProjectInputs,
    config: &CompileConfig,
    selection: &SelectionParams,
) -> Result<(Scene, SceneReport), CompileError> {
    let set = build_candidates(segment, inputs, &config.generator_params())?;
    let table = ScoreTable::from_candidates(&set.candidates, &inputs.saliency)?;
    let chosen = select_branches(&table, selection)?;

    let accepted: Vec<&SelectionStep> = chosen.trace.iter().filter(|s| s.accepted).collect();
    let branches: Vec<Branch> = chosen
        .selected
        .iter()
        .zip(&accepted)
        .enumerate()
        .map(|(k, (&ci, step))| {
            let cand = &set.candidates[ci];
            Branch {
                candidate: ci,
                title: placeholder_branch_title(k),
                social_score: table.social[ci],
                selection: step.breakdown,
                viewport: cand.fov,
                path: cand
                    .path
                    .directions()
                    .iter()
                    .enumerate()
                    .map(|(i, d)| PathSample {
                        frame: cand.path.start_frame() + i,
                        yaw: d.yaw(),
                        pitch: d.pitch(),
                    })
                    .collect(),
                captions: cand.captions.clone(),
                narration: narration_slot(
                    segment.start_s,
                    segment.end_s,
                    &inputs.transcript,
                    config.words_per_second,
                ),
                degenerate: cand.degenerate,
            }
        })
        .collect();
    let default_branch = branches.iter().enumerate().fold(0, |b, (i, br)| {
        if br.social_score > branches[b].social_score {
            i
        } else {
            b
        }
    });

    let report = SceneReport {
        index: segment.index,
        first_frame: segment.first_frame,
        last_frame: segment.last_frame,
        seed_frame: set.seed_frame,
        candidate_count: set.candidates.len(),
        selected: chosen.selected.clone(),
        degenerate: set.degenerate,
        selection_trace: chosen.trace.clone(),
    };
    let scene = Scene {
        span: segment.clone(),
        title: placeholder_scene_title(segment.index),
        default_branch,
        candidate_count: set.candidates.len(),
        degenerate: set.degenerate,
        diversity: chosen.breakdown,
        selection_trace: chosen.trace,
        branches,
    };
    Ok((scene, report))
}

/// Runs the whole pipeline on loaded inputs. `provider` fills narration and
/// titles; without one the graph keeps placeholder titles.
pub fn compile(
    inputs: &ProjectInputs,
    config: &CompileConfig,
    provider: Option<&dyn DescriptionProvider>,
    directives: &[String],
) -> Result<CompileOutput, CompileError> {
    config.validate()?;
    inputs.validate()?;
    let selection = config.selection_params()?;
    let frame_count = inputs.frame_count();
    let mut warnings = Vec::new();

    let boundaries = detect_scene_boundaries(&inputs.frames, config.scene_threshold);
    let zones = exclusion_zones(&inputs.transcript, &inputs.loudness, config.rms_threshold);
    let detected = detect_branching_points(&boundaries, &zones, config.min_interval_s);

    // Points too close to the end would open an empty final scene.
    let mut points: Vec<BranchPoint> = Vec::new();
    for p in detected {
        if (p.time.ceil() as usize) < frame_count && p.time < inputs.duration_s {
            points.push(BranchPoint {
                id: points.len(),
                ..p
            });
        } else {
            warnings.push(format!(
                "branch point at {:.3} s dropped: no frames remain after it",
                p.time
            ));
        }
    }
    let segments = segments_from_points(&points, frame_count, inputs.duration_s);

    let work = || -> Result<Vec<(Scene, SceneReport)>, CompileError> {
        segments
            .par_iter()
            .map(|seg| build_scene(seg, inputs, config, &selection))
            .collect()
    };
    let built = if config.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| CompileError::Config(e.to_string()))?
            .install(work)?
    } else {
        work()?
    };
    let (scenes, scene_reports): (Vec<Scene>, Vec<SceneReport>) = built.into_iter().unzip();

    for s in &scene_reports {
        if s.degenerate {
            warnings.push(format!(
                "scene {} has no salient regions; using a forward-facing fallback branch",
                s.index
            ));
        }
    }
    for scene in &scenes {
        if scene.branches.iter().any(|b| b.narration.unplaceable) {
            warnings.push(format!(
                "scene {}: speech covers the whole scene; narration is unplaceable",
                scene.span.index
            ));
        }
    }

    let mut graph = BranchGraph {
        version: GRAPH_VERSION.to_string(),
        video: VideoMeta {
            duration_s: inputs.duration_s,
            fps: inputs.fps,
            frame_count,
        },
        settings: GraphSettings {
            rms_threshold: config.rms_threshold,
            min_interval_s: config.min_interval_s,
            merge_angle_deg: config.merge_angle_deg,
            smoothing_window: config.smoothing_window,
            fov: config.fov(),
            weights: selection.weights,
            lambda: config.lambda,
            max_options: config.max_options,
            words_per_second: config.words_per_second,
        },
        exclusion_zones: zones,
        branch_points: points,
        scenes,
        cues: Vec::new(),
    };

    let descriptions = provider.map(|p| fill_descriptions(&mut graph, p, directives));
    if let Some(fill) = &descriptions {
        warnings.extend(
            fill.provider_failures
                .iter()
                .map(|f| format!("provider: {f}")),
        );
        warnings.extend(
            fill.overruns
                .iter()
                .map(|k| format!("{k}: text trimmed to budget")),
        );
    }
    graph.cues = plan_cues(&graph);

    Ok(CompileOutput {
        report: CompileReport {
            scene_boundaries: boundaries,
            branch_points: graph.branch_point_times(),
            scenes: scene_reports,
            warnings,
            descriptions,
        },
        graph,
    })
}

/// Loads the manifest and compiles it with the provider the config selects.
pub fn compile_manifest(
    manifest: &Path,
    config: &CompileConfig,
) -> Result<CompileOutput, CompileError> {
    config.validate()?;
    let inputs = crate::ingest::load_project(manifest)?;
    let provider = config.make_provider()?;
    let directives = config.load_directives()?;
    compile(&inputs, config, provider.as_deref(), &directives)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_reference_configuration() {
        let c = CompileConfig::from_toml("").unwrap();
        assert_eq!(c, CompileConfig::default());
        assert_eq!(c.rms_threshold, 0.8);
        assert_eq!(c.min_interval_s, 30.0);
        assert_eq!(c.merge_angle_deg, 30.0);
        assert_eq!(c.smoothing_window, 5);
        assert_eq!((c.h_fov, c.v_fov), (120.0, 90.0));
        assert_eq!(c.region_threshold, 0.5);
        assert_eq!(c.min_area_fraction, 0.001);
        assert_eq!(c.scene_threshold, 0.11);
        assert_eq!(c.lambda, 0.75);
        assert_eq!(c.max_options, 5);
        assert_eq!(c.words_per_second, 3.0);
        let w = c.weights().unwrap();
        assert!((w.spatial - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn lambda_out_of_range_is_rejected() {
        let err = CompileConfig::from_toml("lambda = 1.5").unwrap_err();
        assert!(err.to_string().contains("lambda"), "{err}");
    }

    #[test]
    fn other_bad_values() {
        for bad in [
            "smoothing_window = 4",
            "max_options = 0",
            "h_fov = 400.0",
            "w_spa = -1.0",
            "provider = \"file\"",
            "unknown_key = 1",
        ] {
            assert!(CompileConfig::from_toml(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn weights_are_rescaled() {
        let c = CompileConfig::from_toml("w_spa = 2.0\nw_sem = 1.0\nw_soc = 1.0").unwrap();
        let w = c.weights().unwrap();
        assert_eq!((w.spatial, w.semantic, w.social), (0.5, 0.25, 0.25));
    }
}
