//! Trimming of silent gaps at both ends of an utterance.
//!
//! Windows of `window_length` samples are scanned inward from each end. The
//! first window whose mean absolute amplitude strictly exceeds the mean
//! absolute amplitude of the whole signal marks the boundary. Both
//! boundaries are measured on the original signal and a single slice is
//! taken.

use crate::error::{Error, Result};
use crate::ingest::AudioSignal;

/// Window length used for 16 kHz audio.
pub const DEFAULT_WINDOW_LENGTH: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClipConfig {
    pub window_length: usize,
}

impl ClipConfig {
    pub fn new(window_length: usize) -> Result<Self> {
        if window_length == 0 {
            return Err(Error::InvalidConfig("window_length must be >= 1".into()));
        }
        Ok(Self { window_length })
    }
}

impl Default for ClipConfig {
    fn default() -> Self {
        Self {
            window_length: DEFAULT_WINDOW_LENGTH,
        }
    }
}

fn mean_abs(samples: &[f32]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|&s| f64::from(s).abs()).sum::<f64>() / samples.len() as f64
}

/// Half-open range `[start, end)` that [`clip_silence`] keeps.
pub fn clip_bounds(samples: &[f32], config: ClipConfig) -> (usize, usize) {
    let n = samples.len();
    let delta = config.window_length.max(1);
    if n < delta {
        return (0, n);
    }
    let global = mean_abs(samples);
    let loud = |idx: usize| mean_abs(&samples[idx..idx + delta]) > global;

    let start = (0..=n - delta).step_by(delta).find(|&idx| loud(idx)).unwrap_or(0);
    // Tail grid: n - delta, n - 2*delta, ... down to the last start >= 0.
    let end = (1..=n / delta)
        .map(|k| n - k * delta)
        .find(|&idx| loud(idx))
        .map_or(n, |idx| idx + delta);

    if end <= start {
        // The two scans found disjoint loud windows; keep everything.
        return (0, n);
    }
    (start, end)
}

pub fn clip_silence(signal: &AudioSignal, config: ClipConfig) -> AudioSignal {
    let (start, end) = clip_bounds(signal.samples(), config);
    signal.slice(start, end)
}
