//! Narration slots, navigation cues and description providers.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::BranchGraph;
use crate::ingest::TranscriptSegment;

pub const DEFAULT_WORDS_PER_SECOND: f64 = 3.0;
/// Playback rate range the player may apply to fit narration into its slot.
pub const SPEECH_RATE_RANGE: (f64, f64) = (1.1, 1.2);
/// Word budget for branch and scene titles.
pub const TITLE_WORD_BUDGET: usize = 8;
/// Environment variable naming the remote provider endpoint.
pub const PROVIDER_URL_ENV: &str = "BRANCHGRAPH_PROVIDER_URL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarrationSlot {
    pub start_s: f64,
    pub end_s: f64,
    pub word_budget: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    /// The branch is covered by speech; no narration fits.
    pub unplaceable: bool,
    /// The provider's text was cut to fit the budget.
    pub overrun: bool,
    pub speech_rate_min: f64,
    pub speech_rate_max: f64,
}

impl NarrationSlot {
    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }
}

pub fn word_budget(duration_s: f64, words_per_second: f64) -> usize {
    // Slack absorbs representation error such as 20.000000001 * 3.
    (duration_s * words_per_second + 1e-9).floor().max(0.0) as usize
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Cuts `text` to at most `budget` words at a word boundary. Returns the
/// (whitespace-normalized when trimmed) text and whether it was cut.
pub fn trim_to_budget(text: &str, budget: usize) -> (String, bool) {
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.len() <= budget {
        (text.trim().to_string(), false)
    } else {
        (words[..budget].join(" "), true)
    }
}

/// Longest stretch of `[start_s, end_s]` free of transcript speech; the
/// earliest one wins ties.
pub fn narration_slot(
    start_s: f64,
    end_s: f64,
    transcript: &[TranscriptSegment],
    words_per_second: f64,
) -> NarrationSlot {
    let mut speech: Vec<(f64, f64)> = transcript
        .iter()
        .filter(|s| s.end > start_s && s.start < end_s)
        .map(|s| (s.start.max(start_s), s.end.min(end_s)))
        .collect();
    speech.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut best = (start_s, start_s);
    let mut cursor = start_s;
    let mut consider = |from: f64, to: f64| {
        if to - from > best.1 - best.0 {
            best = (from, to);
        }
    };
    for (s, e) in speech {
        if s > cursor {
            consider(cursor, s);
        }
        cursor = cursor.max(e);
    }
    if end_s > cursor {
        consider(cursor, end_s);
    }

    let unplaceable = best.1 <= best.0;
    NarrationSlot {
        start_s: best.0,
        end_s: best.1,
        word_budget: if unplaceable {
            0
        } else {
            word_budget(best.1 - best.0, words_per_second)
        },
        text: None,
        unplaceable,
        overrun: false,
        speech_rate_min: SPEECH_RATE_RANGE.0,
        speech_rate_max: SPEECH_RATE_RANGE.1,
    }
}

/// Numbered location of one branch within the storyline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavigationCue {
    /// 1-based.
    pub scene_index: usize,
    pub scene_count: usize,
    /// 1-based.
    pub branch_index: usize,
    pub branch_count: usize,
    pub scene_title: String,
    pub branch_title: String,
    /// Title of the previous scene; absent for the first scene.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recap: Option<String>,
}

impl NavigationCue {
    pub fn announcement(&self) -> String {
        format!(
            "[Scene {} of {}] {}; [Branch {} of {}] {}",
            self.scene_index,
            self.scene_count,
            self.scene_title,
            self.branch_index,
            self.branch_count,
            self.branch_title
        )
    }

    pub fn recap_line(&self) -> Option<String> {
        self.recap
            .as_ref()
            .map(|prev| format!("[Previously] {}; [Now] {}", prev, self.scene_title))
    }
}

/// One cue per (scene, branch), in scene then branch order.
pub fn plan_cues(graph: &BranchGraph) -> Vec<NavigationCue> {
    let scene_count = graph.scenes.len();
    let mut cues = Vec::new();
    for (s, scene) in graph.scenes.iter().enumerate() {
        let recap = s.checked_sub(1).map(|p| graph.scenes[p].title.clone());
        for (b, branch) in scene.branches.iter().enumerate() {
            cues.push(NavigationCue {
                scene_index: s + 1,
                scene_count,
                branch_index: b + 1,
                branch_count: scene.branches.len(),
                scene_title: scene.title.clone(),
                branch_title: branch.title.clone(),
                recap: recap.clone(),
            });
        }
    }
    cues
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    Narration,
    BranchTitle,
    SceneTitle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Focus {
    pub yaw: f64,
    pub pitch: f64,
}

/// What a provider receives. Serialized as-is for the remote wire format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptionRequest {
    pub kind: RequestKind,
    /// Stable identifier, e.g. `scene-1/branch-0/narration`.
    pub key: String,
    pub captions: Vec<String>,
    /// Narrations of the earlier branches on the path, oldest first.
    pub preceding_narrations: Vec<String>,
    pub directives: Vec<String>,
    pub word_budget: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focus: Option<Focus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptionResponse {
    pub text: String,
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("no text for {0}")]
    NotFound(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("bad response: {0}")]
    BadResponse(String),
    #[error("cannot load provider data: {0}")]
    Load(String),
}

pub trait DescriptionProvider: Send + Sync {
    fn describe(&self, request: &DescriptionRequest) -> Result<DescriptionResponse, ProviderError>;
}

/// Deterministic template texts built from the request alone.
#[derive(Debug, Default, Clone, Copy)]
pub struct StubProvider;

fn unique_captions(captions: &[String]) -> Vec<&str> {
    let mut seen: Vec<&str> = Vec::new();
    for c in captions {
        let c = c.trim();
        if !c.is_empty() && !seen.contains(&c) {
            seen.push(c);
        }
    }
    seen
}

impl DescriptionProvider for StubProvider {
    fn describe(&self, request: &DescriptionRequest) -> Result<DescriptionResponse, ProviderError> {
        let captions = unique_captions(&request.captions);
        let text = match request.kind {
            RequestKind::Narration => {
                let region = request
                    .focus
                    .map(|f| {
                        format!(
                            "Branch over region yaw≈{:.0}°, pitch≈{:.0}°",
                            f.yaw, f.pitch
                        )
                    })
                    .unwrap_or_else(|| "Branch view".to_string());
                if captions.is_empty() {
                    format!("{region}.")
                } else {
                    format!("{region}: {}.", captions.join("; "))
                }
            }
            // Raw captions follow any narration text, so the last one is the plainest.
            RequestKind::BranchTitle => match (captions.last(), request.focus) {
                (Some(c), _) => c.to_string(),
                (None, Some(f)) => format!("Toward yaw {:.0}", f.yaw),
                (None, None) => "Untitled branch".to_string(),
            },
            RequestKind::SceneTitle => captions
                .last()
                .map(|c| c.to_string())
                .unwrap_or_else(|| "Untitled scene".to_string()),
        };
        Ok(DescriptionResponse { text })
    }
}

/// Pre-authored texts keyed by request key.
#[derive(Debug, Clone, Default)]
pub struct FileProvider {
    texts: BTreeMap<String, String>,
}

impl FileProvider {
    pub fn new(texts: BTreeMap<String, String>) -> Self {
        FileProvider { texts }
    }

    /// Reads a JSON object mapping request keys to texts.
    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Load(format!("{}: {e}", path.display())))?;
        let texts = serde_json::from_str(&text)
            .map_err(|e| ProviderError::Load(format!("{}: {e}", path.display())))?;
        Ok(FileProvider { texts })
    }
}

impl DescriptionProvider for FileProvider {
    fn describe(&self, request: &DescriptionRequest) -> Result<DescriptionResponse, ProviderError> {
        self.texts
            .get(&request.key)
            .map(|t| DescriptionResponse { text: t.clone() })
            .ok_or_else(|| ProviderError::NotFound(request.key.clone()))
    }
}

/// Posts each request as JSON to an HTTP endpoint and expects `{"text": ...}`.
#[derive(Debug, Clone)]
pub struct RemoteProvider {
    endpoint: String,
    agent: ureq::Agent,
}

impl RemoteProvider {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        RemoteProvider {
            endpoint: endpoint.into(),
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }

    /// Endpoint from [`PROVIDER_URL_ENV`].
    pub fn from_env() -> Result<Self, ProviderError> {
        let url = std::env::var(PROVIDER_URL_ENV)
            .map_err(|_| ProviderError::Load(format!("{PROVIDER_URL_ENV} is not set")))?;
        Ok(RemoteProvider::new(url, Duration::from_secs(60)))
    }
}

impl DescriptionProvider for RemoteProvider {
    fn describe(&self, request: &DescriptionRequest) -> Result<DescriptionResponse, ProviderError> {
        let response = self
            .agent
            .post(&self.endpoint)
            .send_json(request)
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        response
            .into_json::<DescriptionResponse>()
            .map_err(|e| ProviderError::BadResponse(e.to_string()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FillReport {
    pub requests: usize,
    pub provider_failures: Vec<String>,
    pub overruns: Vec<String>,
    pub unplaceable: Vec<String>,
}

impl FillReport {
    pub fn has_warnings(&self) -> bool {
        !self.provider_failures.is_empty()
    }
}

fn narration_key(scene: usize, branch: usize) -> String {
    format!("scene-{scene}/branch-{branch}/narration")
}

fn branch_title_key(scene: usize, branch: usize) -> String {
    format!("scene-{scene}/branch-{branch}/title")
}

fn scene_title_key(scene: usize) -> String {
    format!("scene-{scene}/title")
}

pub fn placeholder_scene_title(scene: usize) -> String {
    format!("Scene {}", scene + 1)
}

pub fn placeholder_branch_title(branch: usize) -> String {
    format!("Branch {}", branch + 1)
}

/// Directives sent with title requests, ahead of the user directives.
const BRANCH_TITLE_DIRECTIVE: &str = "Write a short title summarizing this branch.";
const SCENE_TITLE_DIRECTIVE: &str = "Write a short title summarizing all branches of this scene.";
const NARRATION_DIRECTIVE: &str =
    "Continue the narration so it stays coherent with the preceding narrations.";

/// Fills narration texts, branch titles and scene titles, then rebuilds the
/// cue table. Provider failures leave placeholders and are reported rather
/// than returned as errors.
///
/// Narrations continue from the default branch of every earlier scene, the
/// path a viewer follows without making choices.
pub fn fill_descriptions(
    graph: &mut BranchGraph,
    provider: &dyn DescriptionProvider,
    directives: &[String],
) -> FillReport {
    let mut report = FillReport::default();
    let mut preceding: Vec<String> = Vec::new();
    let with = |first: &str| -> Vec<String> {
        std::iter::once(first.to_string())
            .chain(directives.iter().cloned())
            .collect()
    };

    for s in 0..graph.scenes.len() {
        for b in 0..graph.scenes[s].branches.len() {
            let branch = &graph.scenes[s].branches[b];
            let key = narration_key(s, b);
            if branch.narration.unplaceable {
                report.unplaceable.push(key);
                graph.scenes[s].branches[b].narration.text = None;
                continue;
            }
            let request = DescriptionRequest {
                kind: RequestKind::Narration,
                key: key.clone(),
                captions: branch.captions.iter().flatten().cloned().collect(),
                preceding_narrations: preceding.clone(),
                directives: with(NARRATION_DIRECTIVE),
                word_budget: branch.narration.word_budget,
                focus: Some(branch.focus()),
            };
            report.requests += 1;
            let slot = &mut graph.scenes[s].branches[b].narration;
            match provider.describe(&request) {
                Ok(resp) => {
                    let (text, cut) = trim_to_budget(&resp.text, slot.word_budget);
                    if cut {
                        report.overruns.push(key);
                    }
                    slot.overrun = cut;
                    slot.text = Some(text);
                }
                Err(e) => {
                    report.provider_failures.push(format!("{key}: {e}"));
                    slot.overrun = false;
                    slot.text = None;
                }
            }
        }

        let narrations: Vec<String> = graph.scenes[s]
            .branches
            .iter()
            .map(|br| br.narration.text.clone().unwrap_or_default())
            .collect();
        for (b, narration) in narrations.iter().enumerate() {
            let branch = &graph.scenes[s].branches[b];
            let key = branch_title_key(s, b);
            let mut captions: Vec<String> = Vec::new();
            if !narration.is_empty() {
                captions.push(narration.clone());
            }
            captions.extend(branch.captions.iter().flatten().cloned());
            let request = DescriptionRequest {
                kind: RequestKind::BranchTitle,
                key: key.clone(),
                captions,
                preceding_narrations: preceding.clone(),
                directives: with(BRANCH_TITLE_DIRECTIVE),
                word_budget: TITLE_WORD_BUDGET,
                focus: Some(branch.focus()),
            };
            report.requests += 1;
            let title = match provider.describe(&request) {
                Ok(resp) => trim_to_budget(&resp.text, TITLE_WORD_BUDGET).0,
                Err(e) => {
                    report.provider_failures.push(format!("{key}: {e}"));
                    String::new()
                }
            };
            graph.scenes[s].branches[b].title = if title.is_empty() {
                placeholder_branch_title(b)
            } else {
                title
            };
        }

        let key = scene_title_key(s);
        let default = graph.scenes[s].default_branch;
        let mut captions: Vec<String> = narrations
            .iter()
            .filter(|n| !n.is_empty())
            .cloned()
            .collect();
        if let Some(branch) = graph.scenes[s].branches.get(default) {
            captions.extend(branch.captions.iter().flatten().cloned());
        }
        let request = DescriptionRequest {
            kind: RequestKind::SceneTitle,
            key: key.clone(),
            captions,
            preceding_narrations: preceding.clone(),
            directives: with(SCENE_TITLE_DIRECTIVE),
            word_budget: TITLE_WORD_BUDGET,
            focus: None,
        };
        report.requests += 1;
        let title = match provider.describe(&request) {
            Ok(resp) => trim_to_budget(&resp.text, TITLE_WORD_BUDGET).0,
            Err(e) => {
                report.provider_failures.push(format!("{key}: {e}"));
                String::new()
            }
        };
        graph.scenes[s].title = if title.is_empty() {
            placeholder_scene_title(s)
        } else {
            title
        };

        if let Some(text) = narrations.get(default).filter(|t| !t.is_empty()) {
            preceding.push(text.clone());
        }
    }
    graph.cues = plan_cues(graph);
    report
}

/// Reads a directives file: one directive per non-empty line.
pub fn load_directives(path: &Path) -> std::io::Result<Vec<String>> {
    Ok(std::fs::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn speech(start: f64, end: f64) -> TranscriptSegment {
        TranscriptSegment {
            start,
            end,
            text: "...".into(),
        }
    }

    #[test]
    fn slot_after_speech() {
        let slot = narration_slot(40.0, 80.0, &[speech(50.0, 60.0)], 3.0);
        assert_eq!(
            (slot.start_s, slot.end_s, slot.word_budget),
            (60.0, 80.0, 60)
        );
        assert!(!slot.unplaceable);
    }

    #[test]
    fn slot_without_speech_is_whole_branch() {
        let slot = narration_slot(0.0, 30.0, &[], 3.0);
        assert_eq!(
            (slot.start_s, slot.end_s, slot.word_budget),
            (0.0, 30.0, 90)
        );
    }

    #[test]
    fn slot_in_small_gap() {
        let slot = narration_slot(0.0, 60.0, &[speech(0.0, 40.0), speech(42.0, 60.0)], 3.0);
        assert_eq!(
            (slot.start_s, slot.end_s, slot.word_budget),
            (40.0, 42.0, 6)
        );
    }

    #[test]
    fn slot_ties_pick_earliest() {
        let slot = narration_slot(0.0, 30.0, &[speech(10.0, 20.0)], 3.0);
        assert_eq!((slot.start_s, slot.end_s), (0.0, 10.0));
    }

    #[test]
    fn fully_spoken_branch_is_unplaceable() {
        let slot = narration_slot(10.0, 20.0, &[speech(5.0, 25.0)], 3.0);
        assert!(slot.unplaceable);
        assert_eq!(slot.word_budget, 0);
        assert_eq!(slot.duration(), 0.0);
    }

    #[test]
    fn trimming() {
        let long: String = (0..200).map(|i| format!("w{i} ")).collect();
        let (text, cut) = trim_to_budget(&long, 60);
        assert!(cut);
        assert_eq!(word_count(&text), 60);
        assert!(text.starts_with("w0 w1") && text.ends_with("w59"));
        assert_eq!(
            trim_to_budget("  short text ", 60),
            ("short text".into(), false)
        );
    }

    #[test]
    fn cue_strings() {
        let cue = NavigationCue {
            scene_index: 3,
            scene_count: 7,
            branch_index: 3,
            branch_count: 3,
            scene_title: "In the subway".into(),
            branch_title: "Search for Exits".into(),
            recap: Some("Ground Explosion".into()),
        };
        assert_eq!(
            cue.announcement(),
            "[Scene 3 of 7] In the subway; [Branch 3 of 3] Search for Exits"
        );
        assert_eq!(
            cue.recap_line().unwrap(),
            "[Previously] Ground Explosion; [Now] In the subway"
        );
    }

    #[test]
    fn stub_is_deterministic() {
        let req = DescriptionRequest {
            kind: RequestKind::Narration,
            key: "scene-0/branch-0/narration".into(),
            captions: vec!["a dog".into(), "a dog".into(), "a tree".into()],
            preceding_narrations: vec![],
            directives: vec![],
            word_budget: 30,
            focus: Some(Focus {
                yaw: -90.0,
                pitch: 0.0,
            }),
        };
        let a = StubProvider.describe(&req).unwrap();
        assert_eq!(a, StubProvider.describe(&req).unwrap());
        assert_eq!(
            a.text,
            "Branch over region yaw≈-90°, pitch≈0°: a dog; a tree."
        );
    }

    #[test]
    fn file_provider_misses_are_errors() {
        let p = FileProvider::new(BTreeMap::from([("k".to_string(), "text".to_string())]));
        let mut req = DescriptionRequest {
            kind: RequestKind::SceneTitle,
            key: "k".into(),
            captions: vec![],
            preceding_narrations: vec![],
            directives: vec![],
            word_budget: 8,
            focus: None,
        };
        assert_eq!(p.describe(&req).unwrap().text, "text");
        req.key = "other".into();
        assert!(matches!(p.describe(&req), Err(ProviderError::NotFound(_))));
    }
}
