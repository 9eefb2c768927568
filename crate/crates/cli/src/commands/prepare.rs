//! `npasr prepare`: filter numeric transcriptions and clip silence.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use npasr_core::ingest::{filter_numeric, load_wav, parse_manifest, save_wav, write_manifest, ManifestEntry};
use npasr_core::preprocess::{clip_silence, ClipConfig};
use rayon::prelude::*;

use super::{audio_path, check_id, Failures};
use crate::config::{require_path, PipelineConfig};
use crate::PrepareArgs;

pub const OUTPUT_MANIFEST: &str = "manifest.tsv";

/// Seconds before and after clipping.
fn clip_one(entry: &ManifestEntry, audio_dir: &Path, out_dir: &Path, clip: ClipConfig) -> Result<(f64, f64)> {
    check_id(&entry.utterance_id)?;
    let src = audio_path(audio_dir, &entry.utterance_id);
    let signal = load_wav(&src)?;
    let clipped = clip_silence(&signal, clip);
    save_wav(&clipped, out_dir.join(format!("{}.wav", entry.utterance_id)))?;
    Ok((signal.duration_secs(), clipped.duration_secs()))
}

pub fn run(args: PrepareArgs, config: &PipelineConfig) -> Result<Failures> {
    let manifest = require_path(args.manifest, &config.paths.manifest, "manifest", "manifest")?;
    let audio_dir = require_path(args.audio_dir, &config.paths.data_dir, "audio-dir", "data_dir")?;
    let clip = ClipConfig::new(args.window_length.unwrap_or(config.clip.window_length))?;
    let entries = parse_manifest(&manifest)?;
    let total = entries.len();
    let kept = filter_numeric(entries);
    log::info!(
        "{} of {total} utterances kept after dropping numeric transcriptions",
        kept.len()
    );
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;

    let results: Vec<_> = kept
        .par_iter()
        .map(|e| clip_one(e, &audio_dir, &args.out_dir, clip))
        .collect();
    let (mut before, mut after) = (0.0, 0.0);
    let mut written = Vec::with_capacity(kept.len());
    let mut failures = 0;
    for (entry, result) in kept.into_iter().zip(results) {
        match result {
            Ok((b, a)) => {
                before += b;
                after += a;
                written.push(entry);
            }
            Err(e) => {
                failures += 1;
                eprintln!("{}: {e:#}", entry.utterance_id);
            }
        }
    }
    write_manifest(&written, args.out_dir.join(OUTPUT_MANIFEST))?;
    let ratio = if before > 0.0 { after / before } else { 1.0 };
    println!(
        "prepared {} utterances; retained {:.2}% of audio ({after:.2} s of {before:.2} s)",
        written.len(),
        100.0 * ratio
    );
    Ok(failures)
}
