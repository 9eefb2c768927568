//! Audio and manifest input.
//!
//! WAV files are mono 16-bit PCM; manifests are tab-separated
//! `utterance_id [speaker_id] transcription` lines in the layout of the
//! OpenSLR crowd-sourced corpora.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Sample rate the whole pipeline runs at.
pub const PIPELINE_SAMPLE_RATE: u32 = 16_000;

const PCM_SCALE: f32 = 32768.0;

/// Mono waveform with amplitudes in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if let Some((i, s)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !(-1.0..=1.0).contains(*s))
        {
            return Err(Error::InvalidArgument(format!(
                "sample {i} = {s} outside [-1, 1]"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// Sub-range `[start, end)` as a new signal.
    pub fn slice(&self, start: usize, end: usize) -> AudioSignal {
        AudioSignal {
            samples: self.samples[start..end].to_vec(),
            sample_rate: self.sample_rate,
        }
    }

    /// Errors unless the signal is at the pipeline rate; there is no resampler.
    pub fn require_pipeline_rate(&self) -> Result<()> {
        if self.sample_rate != PIPELINE_SAMPLE_RATE {
            return Err(Error::Wav {
                field: "sample_rate",
                detail: format!(
                    "{} Hz, pipeline requires {PIPELINE_SAMPLE_RATE} Hz",
                    self.sample_rate
                ),
            });
        }
        Ok(())
    }
}

fn wav_error(err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) => Error::Wav {
            field: "data",
            detail: e.to_string(),
        },
        hound::Error::FormatError(msg) => Error::Wav {
            field: "header",
            detail: msg.to_string(),
        },
        hound::Error::Unsupported => Error::Wav {
            field: "format",
            detail: "audio format is not PCM".into(),
        },
        other => Error::Wav {
            field: "header",
            detail: other.to_string(),
        },
    }
}

/// Reads a mono PCM16 RIFF/WAVE file. Samples are scaled by 1/32768.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioSignal> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = hound::WavReader::new(std::io::BufReader::new(file)).map_err(wav_error)?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::Wav {
            field: "format",
            detail: "floating-point samples, expected PCM".into(),
        });
    }
    if spec.channels != 1 {
        return Err(Error::Wav {
            field: "channels",
            detail: format!("{} channels, expected 1", spec.channels),
        });
    }
    if spec.bits_per_sample != 16 {
        return Err(Error::Wav {
            field: "bits_per_sample",
            detail: format!("{} bits, expected 16", spec.bits_per_sample),
        });
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| f32::from(v) / PCM_SCALE))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(wav_error)?;
    AudioSignal::new(samples, spec.sample_rate)
}

/// Writes `signal` as mono PCM16. Amplitudes are rounded and saturated to
/// the `i16` range, so `1.0` is stored as 32767.
pub fn save_wav(signal: &AudioSignal, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = hound::WavWriter::new(BufWriter::new(file), spec).map_err(wav_error)?;
    for &s in &signal.samples {
        let q = (s * PCM_SCALE).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q).map_err(wav_error)?;
    }
    writer.finalize().map_err(wav_error)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub utterance_id: String,
    pub speaker_id: String,
    pub transcription: String,
}

impl ManifestEntry {
    pub fn new(
        utterance_id: impl Into<String>,
        speaker_id: impl Into<String>,
        transcription: impl Into<String>,
    ) -> Self {
        Self {
            utterance_id: utterance_id.into(),
            speaker_id: speaker_id.into(),
            transcription: transcription.into(),
        }
    }
}

/// Parses manifest text. Blank lines are ignored; line numbers in errors
/// are 1-based.
pub fn parse_manifest_str(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut entries = Vec::new();
    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.splitn(3, '\t').collect();
        let entry = match cols.as_slice() {
            [id, speaker, text] => ManifestEntry::new(*id, *speaker, *text),
            [id, text] => ManifestEntry::new(*id, "", *text),
            _ => {
                return Err(Error::Manifest {
                    line: line_no,
                    detail: "expected at least 2 tab-separated columns".into(),
                })
            }
        };
        if entry.utterance_id.is_empty() {
            return Err(Error::Manifest {
                line: line_no,
                detail: "empty utterance id".into(),
            });
        }
        if let Some(&first) = seen.get(&entry.utterance_id) {
            return Err(Error::DuplicateId {
                id: entry.utterance_id,
                first,
                second: line_no,
            });
        }
        seen.insert(entry.utterance_id.clone(), line_no);
        entries.push(entry);
    }
    Ok(entries)
}

pub fn parse_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest_str(&text)
}

/// Writes entries in the three-column layout read by [`parse_manifest`].
pub fn write_manifest(entries: &[ManifestEntry], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for e in entries {
        writeln!(
            out,
            "{}\t{}\t{}",
            e.utterance_id, e.speaker_id, e.transcription
        )
        .map_err(|err| Error::io(path, err))?;
    }
    out.flush().map_err(|err| Error::io(path, err))
}

/// True for ASCII digits and Devanagari digits U+0966..=U+096F.
pub fn is_digit_char(c: char) -> bool {
    c.is_ascii_digit() || ('\u{0966}'..='\u{096F}').contains(&c)
}

/// Drops every entry whose transcription contains a digit, keeping order.
pub fn filter_numeric(entries: Vec<ManifestEntry>) -> Vec<ManifestEntry> {
    entries
        .into_iter()
        .filter(|e| !e.transcription.chars().any(is_digit_char))
        .collect()
}
