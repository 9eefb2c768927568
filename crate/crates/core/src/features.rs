//! MFCC feature extraction.
//!
//! Pipeline: pre-emphasis, framing, Hamming window, power spectrum, mel
//! filterbank, log + orthonormal DCT-II. Consecutive groups of `stack`
//! sub-frame vectors are concatenated into one network input frame
//! (13 coefficients x 4 sub-frames = 52 columns at 100 frames/s by default),
//! and each utterance is z-normalized per column.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Axis};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::ingest::AudioSignal;

/// Floor added to filter energies before the log.
pub const LOG_FLOOR: f64 = 1e-10;

pub const FEATURE_CACHE_MAGIC: &[u8; 8] = b"NPFEAT01";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfccConfig {
    pub pre_emphasis: f64,
    /// Hop between analysis windows, in samples.
    pub sub_hop: usize,
    /// Analysis window length, in samples.
    pub sub_window: usize,
    pub fft_size: usize,
    pub n_mels: usize,
    pub n_coeffs: usize,
    /// Sub-frames concatenated into one output frame.
    pub stack: usize,
    pub f_min: f64,
    pub f_max: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            pre_emphasis: 0.97,
            sub_hop: 40,
            sub_window: 160,
            fft_size: 256,
            n_mels: 13,
            n_coeffs: 13,
            stack: 4,
            f_min: 0.0,
            f_max: 8000.0,
        }
    }
}

impl MfccConfig {
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.sub_hop == 0 || self.sub_window == 0 || self.stack == 0 {
            return bad("sub_hop, sub_window and stack must be positive".into());
        }
        if self.n_mels == 0 || self.n_coeffs == 0 || self.n_coeffs > self.n_mels {
            return bad(format!(
                "need 1 <= n_coeffs ({}) <= n_mels ({})",
                self.n_coeffs, self.n_mels
            ));
        }
        if self.fft_size < self.sub_window {
            return bad(format!(
                "fft_size {} smaller than sub_window {}",
                self.fft_size, self.sub_window
            ));
        }
        if !(0.0..1.0).contains(&self.pre_emphasis) {
            return bad(format!("pre_emphasis {} outside [0, 1)", self.pre_emphasis));
        }
        let nyquist = f64::from(sample_rate) / 2.0;
        if !(self.f_min >= 0.0 && self.f_min < self.f_max) {
            return bad(format!(
                "need 0 <= f_min ({}) < f_max ({})",
                self.f_min, self.f_max
            ));
        }
        if self.f_max > nyquist {
            return bad(format!(
                "f_max {} exceeds Nyquist frequency {nyquist}",
                self.f_max
            ));
        }
        Ok(())
    }

    /// Output frame width, `n_coeffs * stack`.
    pub fn feature_dim(&self) -> usize {
        self.n_coeffs * self.stack
    }

    /// Smallest signal that yields one output frame.
    pub fn min_samples(&self) -> usize {
        self.stack * self.sub_hop + self.sub_window.saturating_sub(self.sub_hop)
    }

    pub fn frame_rate(&self, sample_rate: u32) -> f64 {
        f64::from(sample_rate) / (self.sub_hop * self.stack) as f64
    }
}

/// Network input: one row per output frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub frames: Array2<f64>,
    /// Output frames per second.
    pub frame_rate: f64,
}

impl FeatureMatrix {
    pub fn new(frames: Array2<f64>, frame_rate: f64) -> Self {
        Self { frames, frame_rate }
    }

    pub fn num_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn dim(&self) -> usize {
        self.frames.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.frames.view()
    }
}

/// `y[0] = x[0]`, `y[t] = x[t] - alpha * x[t-1]`.
///
/// Returns raw samples rather than an [`AudioSignal`] since the filtered
/// values can leave `[-1, 1]`.
pub fn pre_emphasize(samples: &[f32], alpha: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    let mut prev = 0.0f64;
    for (t, &s) in samples.iter().enumerate() {
        let x = f64::from(s);
        out.push(if t == 0 { x } else { x - alpha * prev });
        prev = x;
    }
    out
}

/// Symmetric Hamming window, `0.54 - 0.46 cos(2 pi n / (N - 1))`.
pub fn hamming_window(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (len - 1) as f64).cos())
        .collect()
}

/// Number of full analysis windows that fit in `len` samples.
pub fn sub_frame_count(len: usize, config: &MfccConfig) -> usize {
    if len < config.sub_window {
        0
    } else {
        (len - config.sub_window) / config.sub_hop + 1
    }
}

/// Splits into `sub_window`-long frames every `sub_hop` samples and applies
/// the Hamming window. One row per sub-frame.
pub fn frame_and_window(samples: &[f64], config: &MfccConfig) -> Result<Array2<f64>> {
    let count = sub_frame_count(samples.len(), config);
    if count == 0 {
        return Err(Error::TooShort {
            len: samples.len(),
            min: config.sub_window,
        });
    }
    let window = hamming_window(config.sub_window);
    let mut frames = Array2::zeros((count, config.sub_window));
    for (i, mut row) in frames.axis_iter_mut(Axis(0)).enumerate() {
        let start = i * config.sub_hop;
        let chunk = &samples[start..start + config.sub_window];
        for ((dst, &x), &w) in row.iter_mut().zip(chunk).zip(&window) {
            *dst = x * w;
        }
    }
    Ok(frames)
}

/// Reusable FFT plan for [`power_spectrum`].
pub struct PowerSpectrum {
    fft: Arc<dyn Fft<f64>>,
    fft_size: usize,
    buffer: Vec<Complex<f64>>,
}

impl PowerSpectrum {
    pub fn new(fft_size: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(fft_size);
        Self {
            fft,
            fft_size,
            buffer: vec![Complex::default(); fft_size],
        }
    }

    /// `|DFT_k|^2 / fft_size` for `k = 0..=fft_size/2`, zero-padding the frame.
    pub fn compute(&mut self, frame: &[f64]) -> Vec<f64> {
        assert!(
            frame.len() <= self.fft_size,
            "frame of {} samples exceeds fft size {}",
            frame.len(),
            self.fft_size
        );
        for (i, slot) in self.buffer.iter_mut().enumerate() {
            *slot = Complex::new(frame.get(i).copied().unwrap_or(0.0), 0.0);
        }
        self.fft.process(&mut self.buffer);
        let scale = self.fft_size as f64;
        self.buffer[..self.fft_size / 2 + 1]
            .iter()
            .map(|c| c.norm_sqr() / scale)
            .collect()
    }
}

pub fn power_spectrum(frame: &[f64], fft_size: usize) -> Vec<f64> {
    PowerSpectrum::new(fft_size).compute(frame)
}

/// Hz to mel, `2595 log10(1 + f / 700)`.
pub fn mel(f: f64) -> Result<f64> {
    if !(f >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "frequency {f} must be non-negative"
        )));
    }
    Ok(2595.0 * (1.0 + f / 700.0).log10())
}

pub fn inverse_mel(m: f64) -> Result<f64> {
    if !(m >= 0.0) {
        return Err(Error::InvalidArgument(format!("mel value {m} must be non-negative")));
    }
    Ok(700.0 * (10f64.powf(m / 2595.0) - 1.0))
}

/// `n_mels + 2` edge points equally spaced in mel between `mel(f_min)` and
/// `mel(f_max)`.
pub fn mel_edge_points(config: &MfccConfig) -> Result<Vec<f64>> {
    let lo = mel(config.f_min)?;
    let hi = mel(config.f_max)?;
    let n = config.n_mels + 1;
    Ok((0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect())
}

/// FFT bin of each filter edge, `floor((fft_size + 1) f / sample_rate)`.
fn edge_bins(config: &MfccConfig, sample_rate: u32) -> Result<Vec<usize>> {
    mel_edge_points(config)?
        .into_iter()
        .map(|m| {
            let hz = inverse_mel(m)?;
            let bin = ((config.fft_size + 1) as f64 * hz / f64::from(sample_rate)).floor();
            Ok((bin as usize).min(config.fft_size / 2))
        })
        .collect()
}

/// Centre frequency of each filter after bin snapping, in Hz.
pub fn filter_centers_hz(config: &MfccConfig, sample_rate: u32) -> Result<Vec<f64>> {
    let bins = edge_bins(config, sample_rate)?;
    let hz_per_bin = f64::from(sample_rate) / config.fft_size as f64;
    Ok(bins[1..=config.n_mels]
        .iter()
        .map(|&b| b as f64 * hz_per_bin)
        .collect())
}

/// Triangular filters, one row per filter over the `fft_size/2 + 1` bins.
pub fn mel_filterbank(config: &MfccConfig, sample_rate: u32) -> Result<Array2<f64>> {
    config.validate(sample_rate)?;
    let bins = edge_bins(config, sample_rate)?;
    let n_bins = config.fft_size / 2 + 1;
    let mut bank = Array2::zeros((config.n_mels, n_bins));
    for m in 0..config.n_mels {
        let (left, center, right) = (bins[m], bins[m + 1], bins[m + 2]);
        if !(left < center && center < right) {
            return Err(Error::InvalidConfig(format!(
                "mel filter {m} collapses onto bins ({left}, {center}, {right}); \
                 use fewer filters or a larger fft_size"
            )));
        }
        for k in left..=right {
            bank[[m, k]] = if k <= center {
                (k - left) as f64 / (center - left) as f64
            } else {
                (right - k) as f64 / (right - center) as f64
            };
        }
    }
    Ok(bank)
}

/// Orthonormal DCT-II basis, `n_out x n_in`.
pub fn dct_matrix(n_in: usize, n_out: usize) -> Array2<f64> {
    let n = n_in as f64;
    Array2::from_shape_fn((n_out, n_in), |(k, i)| {
        let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
        scale * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos()
    })
}

/// Filter energies `filterbank . power`, then DCT-II of `ln(energy + 1e-10)`
/// truncated to `n_coeffs`.
pub fn log_mel_and_dct(power: &[f64], filterbank: &Array2<f64>, n_coeffs: usize) -> Vec<f64> {
    let dct = dct_matrix(filterbank.nrows(), n_coeffs);
    log_mel_and_dct_with(power, filterbank, &dct)
}

fn log_mel_and_dct_with(power: &[f64], filterbank: &Array2<f64>, dct: &Array2<f64>) -> Vec<f64> {
    let log_energy: Vec<f64> = filterbank
        .axis_iter(Axis(0))
        .map(|row| {
            let e: f64 = row.iter().zip(power).map(|(w, p)| w * p).sum();
            (e + LOG_FLOOR).ln()
        })
        .collect();
    dct.axis_iter(Axis(0))
        .map(|basis| basis.iter().zip(&log_energy).map(|(b, l)| b * l).sum())
        .collect()
}

/// Precomputed window, filterbank and DCT for repeated extraction.
pub struct MfccExtractor {
    config: MfccConfig,
    sample_rate: u32,
    filterbank: Array2<f64>,
    dct: Array2<f64>,
}

impl MfccExtractor {
    pub fn new(config: MfccConfig, sample_rate: u32) -> Result<Self> {
        let filterbank = mel_filterbank(&config, sample_rate)?;
        let dct = dct_matrix(config.n_mels, config.n_coeffs);
        Ok(Self {
            config,
            sample_rate,
            filterbank,
            dct,
        })
    }

    pub fn config(&self) -> &MfccConfig {
        &self.config
    }

    /// Un-normalized `n_sub x n_coeffs` cepstra, one row per analysis window.
    pub fn cepstra(&self, signal: &AudioSignal) -> Result<Array2<f64>> {
        let emphasized = pre_emphasize(signal.samples(), self.config.pre_emphasis);
        let frames = frame_and_window(&emphasized, &self.config)?;
        let mut spectrum = PowerSpectrum::new(self.config.fft_size);
        let mut out = Array2::zeros((frames.nrows(), self.config.n_coeffs));
        for (frame, mut row) in frames.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
            let power = spectrum.compute(frame.as_slice().expect("contiguous frame"));
            let coeffs = log_mel_and_dct_with(&power, &self.filterbank, &self.dct);
            row.assign(&ndarray::ArrayView1::from(&coeffs));
        }
        Ok(out)
    }

    pub fn extract(&self, signal: &AudioSignal) -> Result<FeatureMatrix> {
        if signal.sample_rate() != self.sample_rate {
            return Err(Error::InvalidArgument(format!(
                "signal at {} Hz, extractor built for {} Hz",
                signal.sample_rate(),
                self.sample_rate
            )));
        }
        let min = self.config.min_samples();
        if signal.len() < min {
            return Err(Error::TooShort {
                len: signal.len(),
                min,
            });
        }
        let cepstra = self.cepstra(signal)?;
        let stack = self.config.stack;
        let n_coeffs = self.config.n_coeffs;
        let rows = cepstra.nrows() / stack;
        let mut stacked = Array2::zeros((rows, n_coeffs * stack));
        for r in 0..rows {
            for s in 0..stack {
                let src = cepstra.row(r * stack + s);
                stacked
                    .row_mut(r)
                    .slice_mut(ndarray::s![s * n_coeffs..(s + 1) * n_coeffs])
                    .assign(&src);
            }
        }
        let matrix = FeatureMatrix::new(stacked, self.config.frame_rate(self.sample_rate));
        Ok(normalize_features(&matrix))
    }
}

pub fn extract_features(signal: &AudioSignal, config: &MfccConfig) -> Result<FeatureMatrix> {
    MfccExtractor::new(*config, signal.sample_rate())?.extract(signal)
}

/// Per-column z-normalization over the utterance; zero-variance columns
/// become zero.
pub fn normalize_features(matrix: &FeatureMatrix) -> FeatureMatrix {
    let mut frames = matrix.frames.clone();
    let t = frames.nrows() as f64;
    if frames.nrows() == 0 {
        return FeatureMatrix::new(frames, matrix.frame_rate);
    }
    for mut col in frames.axis_iter_mut(Axis(1)) {
        let mean = col.sum() / t;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / t;
        let std = var.sqrt();
        if std <= 1e-10 * mean.abs().max(1.0) {
            col.fill(0.0);
        } else {
            col.mapv_inplace(|x| (x - mean) / std);
        }
    }
    FeatureMatrix::new(frames, matrix.frame_rate)
}

/// Writes the `NPFEAT01` cache: magic, rows and cols as u32 LE, then
/// row-major f32 LE values.
pub fn write_feature_cache(matrix: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (rows, cols) = matrix.frames.dim();
    let mut bytes = Vec::with_capacity(16 + rows * cols * 4);
    bytes.extend_from_slice(FEATURE_CACHE_MAGIC);
    bytes.extend_from_slice(&(rows as u32).to_le_bytes());
    bytes.extend_from_slice(&(cols as u32).to_le_bytes());
    for &v in matrix.frames.iter() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

/// Reads a feature cache. The frame rate is not stored, so the default
/// configuration's rate at 16 kHz is assumed.
pub fn read_feature_cache(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_feature_cache(&bytes)
}

pub fn decode_feature_cache(bytes: &[u8]) -> Result<FeatureMatrix> {
    if bytes.len() < 16 || &bytes[..8] != FEATURE_CACHE_MAGIC {
        return Err(Error::Format("missing NPFEAT01 header".into()));
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("feature cache dimensions overflow".into()))?;
    let body = &bytes[16..];
    if body.len() != expected {
        return Err(Error::Format(format!(
            "feature cache body is {} bytes, header implies {expected}",
            body.len()
        )));
    }
    let values: Vec<f64> = body
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    let frames = Array2::from_shape_vec((rows, cols), values)
        .map_err(|e| Error::Format(e.to_string()))?;
    let frame_rate = MfccConfig::default().frame_rate(crate::ingest::PIPELINE_SAMPLE_RATE);
    Ok(FeatureMatrix::new(frames, frame_rate))
}
