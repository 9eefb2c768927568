//! Synthetic tone-sequence utterances for smoke tests and benchmarks.
//!
//! Each character of a fixed alphabet maps to a pure tone; an utterance
//! plays one tone burst per character, separated by short silences, over a
//! faint seeded noise floor.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::{AudioSignal, PIPELINE_SAMPLE_RATE};

#[derive(Debug, Clone, PartialEq)]
pub struct ToneSpec {
    pub sample_rate: u32,
    pub tone_secs: f64,
    pub gap_secs: f64,
    /// Silence before the first and after the last tone.
    pub edge_secs: f64,
    /// Trailing silence pads shorter utterances to this length.
    pub min_secs: f64,
    pub amplitude: f64,
    pub noise: f64,
    /// Frequency of the first alphabet symbol; each next one is
    /// `ratio` times higher.
    pub base_hz: f64,
    pub ratio: f64,
}

impl Default for ToneSpec {
    fn default() -> Self {
        Self {
            sample_rate: PIPELINE_SAMPLE_RATE,
            tone_secs: 0.15,
            gap_secs: 0.05,
            edge_secs: 0.1,
            min_secs: 1.0,
            amplitude: 0.5,
            noise: 1e-3,
            base_hz: 350.0,
            ratio: 2.2,
        }
    }
}

impl ToneSpec {
    pub fn frequency(&self, alphabet: &[char], c: char) -> Result<f64> {
        let i = alphabet
            .iter()
            .position(|&a| a == c)
            .ok_or_else(|| Error::InvalidArgument(format!("{c:?} is not in the tone alphabet")))?;
        Ok(self.base_hz * self.ratio.powi(i as i32))
    }
}

/// Renders `text` as tones. Deterministic in `seed`.
pub fn synth_utterance(text: &str, alphabet: &[char], spec: &ToneSpec, seed: u64) -> Result<AudioSignal> {
    let sr = spec.sample_rate as f64;
    let secs = |s: f64| (s * sr).round() as usize;
    let (tone, gap, edge) = (secs(spec.tone_secs), secs(spec.gap_secs), secs(spec.edge_secs));
    let fade = (tone / 10).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<f64> = vec![0.0; edge];
    for (k, c) in text.chars().enumerate() {
        if k > 0 {
            out.extend(std::iter::repeat_n(0.0, gap));
        }
        let f = spec.frequency(alphabet, c)?;
        if f >= sr / 2.0 {
            return Err(Error::InvalidArgument(format!("tone {f} Hz above Nyquist")));
        }
        for n in 0..tone {
            let ramp = (n.min(tone - 1 - n) as f64 / fade as f64).min(1.0);
            out.push(spec.amplitude * ramp * (2.0 * PI * f * n as f64 / sr).sin());
        }
    }
    out.extend(std::iter::repeat_n(0.0, edge));
    let min_len = secs(spec.min_secs);
    if out.len() < min_len {
        out.resize(min_len, 0.0);
    }
    let samples = out
        .into_iter()
        .map(|v| (v + spec.noise * rng.random_range(-1.0..1.0)).clamp(-1.0, 1.0) as f32)
        .collect();
    AudioSignal::new(samples, spec.sample_rate)
}

/// Alphabet of the stock smoke-test corpus.
pub const SMOKE_ALPHABET: [char; 3] = ['a', 'b', 'c'];

/// Transcriptions of the stock smoke-test corpus: five distinct patterns of
/// 3 to 8 characters, including adjacent repeats.
pub const SMOKE_TEXTS: [&str; 5] = ["abc", "cab", "bbca", "acbac", "cabbacab"];

/// The stock corpus as `(utterance id, transcription, audio)`.
pub fn smoke_corpus() -> Result<Vec<(String, String, AudioSignal)>> {
    let spec = ToneSpec::default();
    SMOKE_TEXTS
        .iter()
        .enumerate()
        .map(|(i, text)| {
            let audio = synth_utterance(text, &SMOKE_ALPHABET, &spec, i as u64)?;
            Ok((format!("tone{i}"), (*text).to_string(), audio))
        })
        .collect()
}
