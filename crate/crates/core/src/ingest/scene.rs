//! Content-aware cut detection on downsampled HSV frames.

use serde::{Deserialize, Serialize};

/// Default cut threshold on the mean absolute HSV difference (about 27/255).
pub const DEFAULT_SCENE_THRESHOLD: f64 = 0.11;

/// A sampled frame reduced to HSV pixels, each channel in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDescriptor {
    pub frame_index: usize,
    pub width: usize,
    pub height: usize,
    pub hsv: Vec<[f32; 3]>,
}

impl FrameDescriptor {
    pub fn from_rgb(frame_index: usize, width: usize, height: usize, rgb: &[[u8; 3]]) -> Self {
        FrameDescriptor {
            frame_index,
            width,
            height,
            hsv: rgb.iter().map(|p| rgb_to_hsv(*p)).collect(),
        }
    }

    pub fn uniform(frame_index: usize, width: usize, height: usize, rgb: [u8; 3]) -> Self {
        FrameDescriptor::from_rgb(frame_index, width, height, &vec![rgb; width * height])
    }
}

pub fn rgb_to_hsv([r, g, b]: [u8; 3]) -> [f32; 3] {
    let (r, g, b) = (r as f32 / 255.0, g as f32 / 255.0, b as f32 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let hue = if delta == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    let sat = if max == 0.0 { 0.0 } else { delta / max };
    [hue, sat, max]
}

/// Mean absolute per-channel difference, hue measured on the circle.
/// Frames of different size count as maximally different.
pub fn frame_difference(a: &FrameDescriptor, b: &FrameDescriptor) -> f64 {
    if a.hsv.len() != b.hsv.len() || a.hsv.is_empty() {
        return 1.0;
    }
    let total: f64 = a
        .hsv
        .iter()
        .zip(&b.hsv)
        .map(|(p, q)| {
            let dh = (p[0] - q[0]).abs() as f64;
            let dh = dh.min(1.0 - dh);
            let ds = (p[1] - q[1]).abs() as f64;
            let dv = (p[2] - q[2]).abs() as f64;
            (dh + ds + dv) / 3.0
        })
        .sum();
    total / a.hsv.len() as f64
}

/// Scene start times in seconds on the 1 fps grid; always starts with 0.
pub fn detect_scene_boundaries(frames: &[FrameDescriptor], threshold: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    for pair in frames.windows(2) {
        if frame_difference(&pair[0], &pair[1]) > threshold {
            let t = pair[1].frame_index as f64;
            if t > *out.last().unwrap() {
                out.push(t);
            }
        }
    }
    out
}
