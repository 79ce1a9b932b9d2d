mod common;

use std::path::Path;

use branchgraph::ingest::{compute_loudness, load_project, read_wav, IngestError};
use serde_json::json;

fn edit_manifest(manifest: &Path, f: impl FnOnce(&mut serde_json::Value)) {
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(manifest).unwrap()).unwrap();
    f(&mut v);
    common::write_json(manifest, &v);
}

fn write_sine_wav(path: &Path, seconds: f64, rate: u32, amplitude: f64, channels: u16) {
    let spec = hound::WavSpec {
        channels,
        sample_rate: rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).unwrap();
    for i in 0..(seconds * rate as f64) as usize {
        let s = amplitude * (2.0 * std::f64::consts::PI * 50.0 * i as f64 / rate as f64).sin();
        for _ in 0..channels {
            w.write_sample((s * i16::MAX as f64).round() as i16)
                .unwrap();
        }
    }
    w.finalize().unwrap();
}

#[test]
fn desk_project_loads_aligned() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = common::write_desk_project(dir.path());
    let inputs = load_project(&manifest).unwrap();
    assert_eq!(inputs.frame_count(), 120);
    assert_eq!(inputs.frames.len(), 120);
    assert_eq!(inputs.loudness.values.len(), 1200);
    assert_eq!(inputs.transcript.len(), 1);
    assert!(inputs
        .saliency
        .iter()
        .enumerate()
        .all(|(i, f)| f.frame_index == i));
    let peak = inputs.saliency[0].max();
    assert!(peak > 0.9 && peak <= 1.0, "{peak}");
}

#[test]
fn missing_transcript_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = common::write_desk_project(dir.path());
    edit_manifest(&manifest, |v| {
        v.as_object_mut().unwrap().remove("transcript");
    });
    let err = load_project(&manifest).unwrap_err();
    assert!(
        matches!(
            err,
            IngestError::MissingEntry {
                input: "transcript"
            }
        ),
        "{err}"
    );
    assert_eq!(err.input(), "transcript");
}

#[test]
fn wrong_saliency_aspect_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = common::write_desk_project(dir.path());
    // Replace one frame with a square map.
    image::GrayImage::new(32, 32)
        .save(dir.path().join("saliency/0007.png"))
        .unwrap();
    let err = load_project(&manifest).unwrap_err();
    assert!(err.to_string().starts_with("saliency aspect"), "{err}");
    assert_eq!(err.input(), "saliency");

    edit_manifest(&manifest, |v| v["saliency"]["width"] = json!(60));
    let err = load_project(&manifest).unwrap_err();
    assert!(err.to_string().starts_with("saliency aspect"), "{err}");
}

#[test]
fn gap_in_frame_files_is_a_grid_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = common::write_desk_project(dir.path());
    std::fs::remove_file(dir.path().join("frames/0050.png")).unwrap();
    let err = load_project(&manifest).unwrap_err();
    assert!(
        matches!(
            err,
            IngestError::GridMismatch {
                input: "frames",
                ..
            }
        ),
        "{err}"
    );
}

#[test]
fn frame_count_must_match_duration() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = common::write_desk_project(dir.path());
    edit_manifest(&manifest, |v| v["duration_s"] = json!(200.0));
    let err = load_project(&manifest).unwrap_err();
    assert_eq!(err.input(), "saliency", "{err}");
}

#[test]
fn overlapping_transcript_is_malformed() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = common::write_desk_project(dir.path());
    common::write_json(
        &dir.path().join("transcript.json"),
        &json!([{"start": 1.0, "end": 5.0, "text": "a"}, {"start": 4.0, "end": 6.0, "text": "b"}]),
    );
    let err = load_project(&manifest).unwrap_err();
    assert_eq!(err.input(), "transcript", "{err}");
}

#[test]
fn embeddings_must_be_unit_and_sized() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = common::write_desk_project(dir.path());
    let mut records = common::embeddings();
    records[3].vector = vec![2.0, 0.0, 0.0, 0.0];
    common::write_json(&dir.path().join("embeddings.json"), &json!(records));
    assert_eq!(load_project(&manifest).unwrap_err().input(), "embeddings");

    records[3].vector = vec![1.0, 0.0];
    common::write_json(&dir.path().join("embeddings.json"), &json!(records));
    assert_eq!(load_project(&manifest).unwrap_err().input(), "embeddings");
}

#[test]
fn wav_audio_replaces_loudness_records() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = common::write_desk_project(dir.path());
    write_sine_wav(&dir.path().join("audio.wav"), 120.0, 4000, 0.5, 2);
    edit_manifest(&manifest, |v| {
        let m = v.as_object_mut().unwrap();
        m.remove("loudness");
        m.insert("audio".into(), json!("audio.wav"));
    });
    let inputs = load_project(&manifest).unwrap();
    assert_eq!(inputs.loudness.values.len(), 1200);
    // A sine of amplitude 0.5 has RMS 0.5 / sqrt(2) once the window is full.
    let v = inputs.loudness.values[600];
    assert!((v - 0.5 / 2f64.sqrt()).abs() < 1e-3, "{v}");
}

#[test]
fn wav_reads_as_mono_unit_range() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tone.wav");
    write_sine_wav(&path, 2.0, 8000, 1.0, 1);
    let (samples, rate) = read_wav(&path).unwrap();
    assert_eq!(rate, 8000.0);
    assert_eq!(samples.len(), 16000);
    assert!(samples.iter().all(|s| (-1.0..=1.0).contains(s)));
    let series = compute_loudness(&samples, rate);
    assert!((series.values[15] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-3);
}

#[test]
fn declaring_both_audio_sources_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = common::write_desk_project(dir.path());
    edit_manifest(&manifest, |v| v["audio"] = json!("audio.wav"));
    assert_eq!(load_project(&manifest).unwrap_err().input(), "audio");
}
