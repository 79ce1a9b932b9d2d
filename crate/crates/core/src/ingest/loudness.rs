use serde::{Deserialize, Serialize};

/// Default rate of the derived loudness series, in samples per second.
pub const DEFAULT_SERIES_RATE: f64 = 10.0;

/// Trailing one-second RMS of normalized amplitude.
///
/// Sample `i` sits at `i / sample_rate` seconds and stands for the interval
/// up to the next sample; its value is the RMS over the second of audio that
/// ends where that interval ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoudnessSeries {
    pub sample_rate: f64,
    pub values: Vec<f64>,
}

impl LoudnessSeries {
    pub fn time_of(&self, index: usize) -> f64 {
        index as f64 / self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.values.len() as f64 / self.sample_rate
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn compute_loudness(samples: &[f64], audio_rate: f64) -> LoudnessSeries {
    compute_loudness_at(samples, audio_rate, DEFAULT_SERIES_RATE)
}

pub fn compute_loudness_at(samples: &[f64], audio_rate: f64, series_rate: f64) -> LoudnessSeries {
    if samples.is_empty() || audio_rate <= 0.0 || series_rate <= 0.0 {
        return LoudnessSeries {
            sample_rate: series_rate,
            values: Vec::new(),
        };
    }
    let window = (audio_rate.round() as usize).max(1);
    let hop = audio_rate / series_rate;
    let count = (samples.len() as f64 / hop).ceil() as usize;

    // Prefix sums of squares; each window is then O(1).
    let mut prefix = Vec::with_capacity(samples.len() + 1);
    prefix.push(0.0f64);
    let mut acc = 0.0;
    for s in samples {
        acc += s * s;
        prefix.push(acc);
    }

    let values = (0..count)
        .map(|i| {
            let end = (((i + 1) as f64 * hop).round() as usize).clamp(1, samples.len());
            let start = end.saturating_sub(window);
            let energy = (prefix[end] - prefix[start]).max(0.0);
            (energy / (end - start) as f64).sqrt().min(1.0)
        })
        .collect();
    LoudnessSeries {
        sample_rate: series_rate,
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silence_is_zero() {
        let s = compute_loudness(&vec![0.0; 16_000], 8000.0);
        assert_eq!(s.values.len(), 20);
        assert!(s.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_scale_square_is_one() {
        let samples: Vec<f64> = (0..24_000)
            .map(|i| if (i / 20) % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let s = compute_loudness(&samples, 8000.0);
        assert!(s.values.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn unit_sine_settles_at_inverse_sqrt_two() {
        let rate = 8000.0;
        let samples: Vec<f64> = (0..(rate as usize * 3))
            .map(|i| (2.0 * std::f64::consts::PI * 440.0 * i as f64 / rate).sin())
            .collect();
        let s = compute_loudness(&samples, rate);
        // The first full window ends at sample index 9 (t = 1 s).
        for &v in &s.values[9..] {
            assert!((v - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-3, "{v}");
        }
    }

    #[test]
    fn empty_audio_gives_empty_series() {
        assert!(compute_loudness(&[], 8000.0).is_empty());
    }

    #[test]
    fn head_windows_use_available_samples() {
        let mut samples = vec![0.5; 400];
        samples.extend(vec![0.0; 7600]);
        let s = compute_loudness(&samples, 8000.0);
        // First series sample covers only the first 800 samples.
        assert!((s.values[0] - (0.25f64 * 400.0 / 800.0).sqrt()).abs() < 1e-12);
    }
}
