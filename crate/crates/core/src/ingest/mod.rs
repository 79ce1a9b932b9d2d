//! Loading and validation of the per-video feature inputs.
//!
//! Everything is aligned to a 1 fps grid: saliency frame `i` and sampled
//! frame `i` both describe second `i` of the video.

pub mod loudness;
pub mod scene;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use loudness::{compute_loudness, compute_loudness_at, LoudnessSeries};
pub use scene::{detect_scene_boundaries, FrameDescriptor, DEFAULT_SCENE_THRESHOLD};

/// Sampled frames wider than this are downsampled before HSV conversion.
const FRAME_DESCRIPTOR_MAX_WIDTH: u32 = 64;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{input}: missing from manifest")]
    MissingEntry { input: &'static str },
    #[error("{input}: cannot read {}: {detail}", path.display())]
    Io {
        input: &'static str,
        path: PathBuf,
        detail: String,
    },
    #[error("{input}: malformed: {detail}")]
    Malformed { input: &'static str, detail: String },
    #[error("saliency aspect: frame {frame} is {width}x{height}, expected width = 2 x height")]
    SaliencyAspect {
        frame: usize,
        width: usize,
        height: usize,
    },
    #[error("{input}: grid mismatch: {detail}")]
    GridMismatch { input: &'static str, detail: String },
}

impl IngestError {
    /// Name of the offending input.
    pub fn input(&self) -> &'static str {
        match self {
            IngestError::MissingEntry { input }
            | IngestError::Io { input, .. }
            | IngestError::Malformed { input, .. }
            | IngestError::GridMismatch { input, .. } => input,
            IngestError::SaliencyAspect { .. } => "saliency",
        }
    }
}

fn malformed(input: &'static str, detail: impl Into<String>) -> IngestError {
    IngestError::Malformed {
        input,
        detail: detail.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyEntry {
    pub dir: PathBuf,
    pub width: usize,
    pub height: usize,
    /// Raw value that maps to 1.0; defaults to the full range of the bit depth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_value: Option<f64>,
}

/// The project manifest. Paths are resolved relative to the manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub fps: u32,
    pub duration_s: f64,
    pub embedding_dim: usize,
    pub saliency: Option<SaliencyEntry>,
    pub transcript: Option<PathBuf>,
    /// Linear PCM WAV file; mutually exclusive with `loudness`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio: Option<PathBuf>,
    /// Precomputed loudness as `[{"time": s, "value": rms}]` records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loudness: Option<PathBuf>,
    pub frames: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyFrame {
    pub frame_index: usize,
    pub width: usize,
    pub height: usize,
    /// Row-major values normalized to [0, 1].
    pub values: Vec<f64>,
}

impl SaliencyFrame {
    pub fn new(frame_index: usize, width: usize, height: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        SaliencyFrame {
            frame_index,
            width,
            height,
            values,
        }
    }

    pub fn zeros(frame_index: usize, width: usize, height: usize) -> Self {
        SaliencyFrame::new(frame_index, width, height, vec![0.0; width * height])
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptSegment {
    pub start: f64,
    pub end: f64,
    pub text: String,
}

/// A caption and its sentence embedding for the viewport looking toward
/// (`yaw`, `pitch`) at `frame`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub frame: usize,
    pub yaw: f64,
    pub pitch: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectInputs {
    pub fps: u32,
    pub duration_s: f64,
    pub embedding_dim: usize,
    pub saliency: Vec<SaliencyFrame>,
    pub transcript: Vec<TranscriptSegment>,
    pub loudness: LoudnessSeries,
    pub frames: Vec<FrameDescriptor>,
    pub embeddings: Vec<EmbeddingRecord>,
}

impl ProjectInputs {
    pub fn frame_count(&self) -> usize {
        self.saliency.len()
    }

    /// Embedding records grouped by frame, in file order.
    pub fn embeddings_by_frame(&self) -> BTreeMap<usize, Vec<&EmbeddingRecord>> {
        let mut map: BTreeMap<usize, Vec<&EmbeddingRecord>> = BTreeMap::new();
        for rec in &self.embeddings {
            map.entry(rec.frame).or_default().push(rec);
        }
        map
    }

    /// Checks every cross-input invariant. [`load_project`] calls this; it is
    /// public so that programmatically built inputs get the same checks.
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.fps != 1 {
            return Err(IngestError::GridMismatch {
                input: "manifest",
                detail: format!("fps must be 1, got {}", self.fps),
            });
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(malformed("manifest", "duration_s must be positive"));
        }
        let expected = (self.duration_s * self.fps as f64).round() as i64;
        check_count("saliency", self.saliency.len(), expected)?;
        check_count("frames", self.frames.len(), expected)?;
        if self.saliency.len() != self.frames.len() {
            return Err(IngestError::GridMismatch {
                input: "frames",
                detail: format!(
                    "{} sampled frames for {} saliency frames",
                    self.frames.len(),
                    self.saliency.len()
                ),
            });
        }

        for (i, f) in self.saliency.iter().enumerate() {
            if f.frame_index != i {
                return Err(IngestError::GridMismatch {
                    input: "saliency",
                    detail: format!("expected frame {i}, found {}", f.frame_index),
                });
            }
            if f.width != 2 * f.height || f.height == 0 {
                return Err(IngestError::SaliencyAspect {
                    frame: i,
                    width: f.width,
                    height: f.height,
                });
            }
            if f.values.len() != f.width * f.height {
                return Err(malformed(
                    "saliency",
                    format!("frame {i} has wrong pixel count"),
                ));
            }
            if f.values.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(malformed(
                    "saliency",
                    format!("frame {i} has values outside [0, 1]"),
                ));
            }
        }
        if let Some(first) = self.saliency.first() {
            if self
                .saliency
                .iter()
                .any(|f| f.width != first.width || f.height != first.height)
            {
                return Err(IngestError::GridMismatch {
                    input: "saliency",
                    detail: "frames differ in resolution".into(),
                });
            }
        }

        for (i, f) in self.frames.iter().enumerate() {
            if f.frame_index != i {
                return Err(IngestError::GridMismatch {
                    input: "frames",
                    detail: format!("expected frame {i}, found {}", f.frame_index),
                });
            }
            if f.hsv.len() != f.width * f.height {
                return Err(malformed(
                    "frames",
                    format!("frame {i} has wrong pixel count"),
                ));
            }
        }

        let mut prev_end = f64::NEG_INFINITY;
        for (i, seg) in self.transcript.iter().enumerate() {
            if !(seg.start.is_finite() && seg.end.is_finite()) || seg.start >= seg.end {
                return Err(malformed(
                    "transcript",
                    format!("segment {i} has start >= end"),
                ));
            }
            if seg.start < prev_end {
                return Err(malformed(
                    "transcript",
                    format!("segment {i} overlaps or precedes its predecessor"),
                ));
            }
            if seg.end > self.duration_s + 1.0 / self.fps as f64 {
                return Err(IngestError::GridMismatch {
                    input: "transcript",
                    detail: format!("segment {i} ends after the video"),
                });
            }
            prev_end = seg.end;
        }

        if self
            .loudness
            .values
            .iter()
            .any(|v| !(0.0..=1.0).contains(v))
        {
            return Err(malformed("loudness", "values outside [0, 1]"));
        }
        if !self.loudness.is_empty()
            && (self.loudness.duration() - self.duration_s).abs() > 1.0 / self.fps as f64
        {
            return Err(IngestError::GridMismatch {
                input: "loudness",
                detail: format!(
                    "covers {:.3} s of a {:.3} s video",
                    self.loudness.duration(),
                    self.duration_s
                ),
            });
        }

        let frames = self.frame_count();
        let mut covered = vec![false; frames];
        for (i, rec) in self.embeddings.iter().enumerate() {
            if rec.frame >= frames {
                return Err(IngestError::GridMismatch {
                    input: "embeddings",
                    detail: format!("record {i} refers to frame {} of {frames}", rec.frame),
                });
            }
            if rec.vector.len() != self.embedding_dim {
                return Err(malformed(
                    "embeddings",
                    format!(
                        "record {i} has dimension {}, manifest declares {}",
                        rec.vector.len(),
                        self.embedding_dim
                    ),
                ));
            }
            let norm = rec.vector.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(malformed(
                    "embeddings",
                    format!("record {i} is not unit-normalized (norm {norm})"),
                ));
            }
            if !(-90.0..=90.0).contains(&rec.pitch) || !rec.yaw.is_finite() {
                return Err(malformed(
                    "embeddings",
                    format!("record {i} has an invalid direction"),
                ));
            }
            covered[rec.frame] = true;
        }
        if let Some(missing) = covered.iter().position(|c| !c) {
            return Err(IngestError::GridMismatch {
                input: "embeddings",
                detail: format!("no record for frame {missing}"),
            });
        }
        Ok(())
    }
}

fn check_count(input: &'static str, found: usize, expected: i64) -> Result<(), IngestError> {
    if (found as i64 - expected).abs() > 1 {
        return Err(IngestError::GridMismatch {
            input,
            detail: format!("{found} frames for a {expected}-frame duration"),
        });
    }
    Ok(())
}

#[derive(Deserialize)]
struct LoudnessRecord {
    time: f64,
    value: f64,
}

fn read_text(input: &'static str, path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|e| IngestError::Io {
        input,
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

fn read_json<T: serde::de::DeserializeOwned>(
    input: &'static str,
    path: &Path,
) -> Result<T, IngestError> {
    let text = read_text(input, path)?;
    serde_json::from_str(&text).map_err(|e| malformed(input, e.to_string()))
}

/// Files in `dir` whose stem parses as a frame index, sorted by index.
fn indexed_files(input: &'static str, dir: &Path) -> Result<Vec<(usize, PathBuf)>, IngestError> {
    let entries = fs::read_dir(dir).map_err(|e| IngestError::Io {
        input,
        path: dir.to_path_buf(),
        detail: e.to_string(),
    })?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| IngestError::Io {
                input,
                path: dir.to_path_buf(),
                detail: e.to_string(),
            })?
            .path();
        if !path.is_file() {
            continue;
        }
        let Some(index) = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse::<usize>().ok())
        else {
            continue;
        };
        files.push((index, path));
    }
    files.sort();
    for (i, (index, _)) in files.iter().enumerate() {
        if *index != i {
            return Err(IngestError::GridMismatch {
                input,
                detail: format!("frame files are not contiguous: expected {i}, found {index}"),
            });
        }
    }
    Ok(files)
}

fn open_image(input: &'static str, path: &Path) -> Result<image::DynamicImage, IngestError> {
    image::open(path).map_err(|e| IngestError::Io {
        input,
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

fn load_saliency(entry: &SaliencyEntry, base: &Path) -> Result<Vec<SaliencyFrame>, IngestError> {
    if entry.width != 2 * entry.height || entry.height == 0 {
        return Err(IngestError::SaliencyAspect {
            frame: 0,
            width: entry.width,
            height: entry.height,
        });
    }
    let files = indexed_files("saliency", &base.join(&entry.dir))?;
    let mut frames = Vec::with_capacity(files.len());
    for (index, path) in files {
        let img = open_image("saliency", &path)?;
        let (width, height) = (img.width() as usize, img.height() as usize);
        if width != 2 * height {
            return Err(IngestError::SaliencyAspect {
                frame: index,
                width,
                height,
            });
        }
        if width != entry.width || height != entry.height {
            return Err(IngestError::GridMismatch {
                input: "saliency",
                detail: format!(
                    "frame {index} is {width}x{height}, manifest declares {}x{}",
                    entry.width, entry.height
                ),
            });
        }
        let (raw, depth_max): (Vec<f64>, f64) = match img {
            image::DynamicImage::ImageLuma8(g) => {
                (g.into_raw().into_iter().map(f64::from).collect(), 255.0)
            }
            image::DynamicImage::ImageLuma16(g) => {
                (g.into_raw().into_iter().map(f64::from).collect(), 65535.0)
            }
            _ => {
                return Err(malformed(
                    "saliency",
                    format!("frame {index} is not 8- or 16-bit grayscale"),
                ))
            }
        };
        let max = entry.max_value.unwrap_or(depth_max);
        if max <= 0.0 {
            return Err(malformed("saliency", "max_value must be positive"));
        }
        let values = raw.into_iter().map(|v| (v / max).clamp(0.0, 1.0)).collect();
        frames.push(SaliencyFrame::new(index, width, height, values));
    }
    Ok(frames)
}

fn load_frames(dir: &Path) -> Result<Vec<FrameDescriptor>, IngestError> {
    let files = indexed_files("frames", dir)?;
    let mut out = Vec::with_capacity(files.len());
    for (index, path) in files {
        let mut img = open_image("frames", &path)?.to_rgb8();
        if img.width() > FRAME_DESCRIPTOR_MAX_WIDTH {
            let h = (img.height() * FRAME_DESCRIPTOR_MAX_WIDTH / img.width()).max(1);
            img = image::imageops::resize(
                &img,
                FRAME_DESCRIPTOR_MAX_WIDTH,
                h,
                image::imageops::FilterType::Triangle,
            );
        }
        let (w, h) = (img.width() as usize, img.height() as usize);
        let rgb: Vec<[u8; 3]> = img.pixels().map(|p| p.0).collect();
        out.push(FrameDescriptor::from_rgb(index, w, h, &rgb));
    }
    if let Some(first) = out.first() {
        if out
            .iter()
            .any(|f| f.width != first.width || f.height != first.height)
        {
            return Err(IngestError::GridMismatch {
                input: "frames",
                detail: "sampled frames differ in resolution".into(),
            });
        }
    }
    Ok(out)
}

/// Reads a WAV file into mono samples in [-1, 1] and its sample rate.
pub fn read_wav(path: &Path) -> Result<(Vec<f64>, f64), IngestError> {
    let io = |e: hound::Error| IngestError::Io {
        input: "audio",
        path: path.to_path_buf(),
        detail: e.to_string(),
    };
    let mut reader = hound::WavReader::open(path).map_err(io)?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(io)?,
        hound::SampleFormat::Int => {
            let scale = (1i64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<Result<_, _>>()
                .map_err(io)?
        }
    };
    let mono = interleaved
        .chunks(channels)
        .map(|c| (c.iter().sum::<f64>() / c.len() as f64).clamp(-1.0, 1.0))
        .collect();
    Ok((mono, spec.sample_rate as f64))
}

fn load_loudness_records(path: &Path) -> Result<LoudnessSeries, IngestError> {
    let records: Vec<LoudnessRecord> = read_json("loudness", path)?;
    if records.is_empty() {
        return Ok(LoudnessSeries {
            sample_rate: loudness::DEFAULT_SERIES_RATE,
            values: Vec::new(),
        });
    }
    if records[0].time.abs() > 1e-6 {
        return Err(malformed("loudness", "first record must be at time 0"));
    }
    let step = if records.len() > 1 {
        records[1].time - records[0].time
    } else {
        1.0 / loudness::DEFAULT_SERIES_RATE
    };
    if step <= 0.0 {
        return Err(malformed("loudness", "record times must increase"));
    }
    for (i, r) in records.iter().enumerate() {
        if (r.time - i as f64 * step).abs() > 1e-6 {
            return Err(malformed(
                "loudness",
                format!("record {i} breaks the uniform spacing of {step} s"),
            ));
        }
    }
    Ok(LoudnessSeries {
        sample_rate: 1.0 / step,
        values: records.into_iter().map(|r| r.value).collect(),
    })
}

pub fn load_manifest(path: &Path) -> Result<Manifest, IngestError> {
    read_json("manifest", path)
}

pub fn load_project(manifest_path: &Path) -> Result<ProjectInputs, IngestError> {
    let manifest = load_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let sal_entry = manifest
        .saliency
        .as_ref()
        .ok_or(IngestError::MissingEntry { input: "saliency" })?;
    let transcript_path = manifest
        .transcript
        .as_ref()
        .ok_or(IngestError::MissingEntry {
            input: "transcript",
        })?;
    let frames_dir = manifest
        .frames
        .as_ref()
        .ok_or(IngestError::MissingEntry { input: "frames" })?;
    let embeddings_path = manifest
        .embeddings
        .as_ref()
        .ok_or(IngestError::MissingEntry {
            input: "embeddings",
        })?;

    let loudness = match (&manifest.audio, &manifest.loudness) {
        (Some(_), Some(_)) => {
            return Err(malformed(
                "audio",
                "declare either audio or loudness, not both",
            ))
        }
        (Some(wav), None) => {
            let (samples, rate) = read_wav(&base.join(wav))?;
            compute_loudness(&samples, rate)
        }
        (None, Some(records)) => load_loudness_records(&base.join(records))?,
        (None, None) => return Err(IngestError::MissingEntry { input: "audio" }),
    };

    let inputs = ProjectInputs {
        fps: manifest.fps,
        duration_s: manifest.duration_s,
        embedding_dim: manifest.embedding_dim,
        saliency: load_saliency(sal_entry, base)?,
        transcript: read_json("transcript", &base.join(transcript_path))?,
        loudness,
        frames: load_frames(&base.join(frames_dir))?,
        embeddings: read_json("embeddings", &base.join(embeddings_path))?,
    };
    inputs.validate()?;
    Ok(inputs)
}
