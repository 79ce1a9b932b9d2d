//! Synthetic "desk" project: 120 s, two moving salient blobs of different
//! strength on roughly opposite sides, colour cuts at 40 s and 80 s, and
//! speech from 35 s to 45 s.

#![allow(dead_code)]

pub mod oracles;

use std::path::{Path, PathBuf};

use branchgraph::ingest::{EmbeddingRecord, TranscriptSegment};
use serde_json::json;

pub const DURATION: usize = 120;
pub const SAL_W: u32 = 64;
pub const SAL_H: u32 = 32;
pub const EMBED_DIM: usize = 4;

/// Yaw of the strong blob at frame `t`: drifts from -20 to about 16 degrees.
pub fn strong_yaw(t: usize) -> f64 {
    -20.0 + 0.3 * t as f64
}

/// Yaw of the weak blob: fixed, behind the viewer.
pub fn weak_yaw(_t: usize) -> f64 {
    160.0
}

fn yaw_to_x(yaw: f64) -> f64 {
    (yaw / 360.0 + 0.5) * SAL_W as f64 - 0.5
}

pub fn saliency_values(t: usize) -> Vec<u8> {
    let blobs = [
        (yaw_to_x(strong_yaw(t)), 255.0),
        (yaw_to_x(weak_yaw(t)), 180.0),
    ];
    let cy = SAL_H as f64 / 2.0 - 0.5;
    let mut out = Vec::with_capacity((SAL_W * SAL_H) as usize);
    for y in 0..SAL_H {
        for x in 0..SAL_W {
            let mut v: f64 = 0.0;
            for (cx, peak) in blobs {
                let mut dx = (x as f64 - cx).abs();
                dx = dx.min(SAL_W as f64 - dx);
                let dy = y as f64 - cy;
                v = v.max(peak * (-(dx * dx + dy * dy) / (2.0 * 2.5 * 2.5)).exp());
            }
            out.push(v.round() as u8);
        }
    }
    out
}

pub fn frame_colour(t: usize) -> [u8; 3] {
    match t {
        0..=39 => [200, 40, 40],
        40..=79 => [40, 200, 40],
        _ => [40, 40, 200],
    }
}

pub fn transcript() -> Vec<TranscriptSegment> {
    vec![TranscriptSegment {
        start: 35.0,
        end: 45.0,
        text: "Welcome to the office, have a seat.".into(),
    }]
}

pub fn embeddings() -> Vec<EmbeddingRecord> {
    let mut out = Vec::new();
    for t in 0..DURATION {
        out.push(EmbeddingRecord {
            frame: t,
            yaw: strong_yaw(t),
            pitch: 0.0,
            caption: Some("a wooden desk with a lamp".into()),
            vector: vec![1.0, 0.0, 0.0, 0.0],
        });
        out.push(EmbeddingRecord {
            frame: t,
            yaw: weak_yaw(t),
            pitch: 0.0,
            caption: Some("a window over the street".into()),
            vector: vec![0.0, 1.0, 0.0, 0.0],
        });
    }
    out
}

/// Writes the project into `dir` and returns the manifest path.
pub fn write_desk_project(dir: &Path) -> PathBuf {
    let sal = dir.join("saliency");
    let frames = dir.join("frames");
    std::fs::create_dir_all(&sal).unwrap();
    std::fs::create_dir_all(&frames).unwrap();
    for t in 0..DURATION {
        image::GrayImage::from_raw(SAL_W, SAL_H, saliency_values(t))
            .unwrap()
            .save(sal.join(format!("{t:04}.png")))
            .unwrap();
        image::RgbImage::from_pixel(32, 16, image::Rgb(frame_colour(t)))
            .save(frames.join(format!("{t:04}.png")))
            .unwrap();
    }
    let loud: Vec<_> = (0..DURATION * 10)
        .map(|i| json!({"time": i as f64 / 10.0, "value": 0.1}))
        .collect();
    write_json(&dir.join("loudness.json"), &json!(loud));
    write_json(&dir.join("transcript.json"), &json!(transcript()));
    write_json(&dir.join("embeddings.json"), &json!(embeddings()));
    let manifest = dir.join("project.json");
    write_json(&manifest, &desk_manifest());
    manifest
}

pub fn desk_manifest() -> serde_json::Value {
    json!({
        "fps": 1,
        "duration_s": DURATION as f64,
        "embedding_dim": EMBED_DIM,
        "saliency": {"dir": "saliency", "width": SAL_W, "height": SAL_H},
        "transcript": "transcript.json",
        "loudness": "loudness.json",
        "frames": "frames",
        "embeddings": "embeddings.json"
    })
}

pub fn write_json(path: &Path, value: &serde_json::Value) {
    std::fs::write(path, serde_json::to_string_pretty(value).unwrap()).unwrap();
}

/// The same project built in memory, without touching the filesystem.
pub fn desk_inputs() -> branchgraph::ingest::ProjectInputs {
    use branchgraph::ingest::{FrameDescriptor, LoudnessSeries, ProjectInputs, SaliencyFrame};
    ProjectInputs {
        fps: 1,
        duration_s: DURATION as f64,
        embedding_dim: EMBED_DIM,
        saliency: (0..DURATION)
            .map(|t| {
                let values = saliency_values(t)
                    .into_iter()
                    .map(|v| v as f64 / 255.0)
                    .collect();
                SaliencyFrame::new(t, SAL_W as usize, SAL_H as usize, values)
            })
            .collect(),
        transcript: transcript(),
        loudness: LoudnessSeries {
            sample_rate: 10.0,
            values: vec![0.1; DURATION * 10],
        },
        frames: (0..DURATION)
            .map(|t| FrameDescriptor::uniform(t, 32, 16, frame_colour(t)))
            .collect(),
        embeddings: embeddings(),
    }
}

pub fn desk_graph() -> branchgraph::graph::BranchGraph {
    use branchgraph::narration::StubProvider;
    use branchgraph::pipeline::{compile, CompileConfig};
    compile(
        &desk_inputs(),
        &CompileConfig::default(),
        Some(&StubProvider),
        &[],
    )
    .unwrap()
    .graph
}
