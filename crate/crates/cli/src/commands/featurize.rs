//! `npasr featurize`: one feature cache per utterance.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use npasr_core::error::Error;
use npasr_core::features::{write_feature_cache, MfccExtractor};
use npasr_core::ingest::{load_wav, parse_manifest, ManifestEntry, PIPELINE_SAMPLE_RATE};
use rayon::prelude::*;

use super::{audio_path, check_id, feature_path, Failures};
use crate::config::{require_path, PipelineConfig};
use crate::FeaturizeArgs;

pub const REPORT_FILE: &str = "featurize_report.tsv";

#[derive(Debug)]
enum Status {
    Written,
    Existing,
    /// Skipped with a warning; not counted as a failure.
    TooShort(String),
    Failed(String),
}

fn featurize_one(
    entry: &ManifestEntry,
    audio_dir: &Path,
    out_dir: &Path,
    extractor: &MfccExtractor,
    force: bool,
) -> Status {
    let run = || -> Result<Status> {
        check_id(&entry.utterance_id)?;
        let dest = feature_path(out_dir, &entry.utterance_id);
        if !force && dest.exists() {
            return Ok(Status::Existing);
        }
        let signal = load_wav(audio_path(audio_dir, &entry.utterance_id))?;
        signal.require_pipeline_rate()?;
        match extractor.extract(&signal) {
            Ok(features) => {
                write_feature_cache(&features, &dest)?;
                Ok(Status::Written)
            }
            Err(e @ Error::TooShort { .. }) => Ok(Status::TooShort(e.to_string())),
            Err(e) => Err(e.into()),
        }
    };
    run().unwrap_or_else(|e| Status::Failed(format!("{e:#}")))
}

pub fn run(args: FeaturizeArgs, config: &PipelineConfig) -> Result<Failures> {
    let manifest = require_path(args.manifest, &config.paths.manifest, "manifest", "manifest")?;
    let audio_dir = require_path(args.audio_dir, &config.paths.data_dir, "audio-dir", "data_dir")?;
    let out_dir = require_path(args.out_dir, &config.paths.features_dir, "out-dir", "features_dir")?;
    let extractor = MfccExtractor::new(config.mfcc_config(), PIPELINE_SAMPLE_RATE)?;
    let entries = parse_manifest(&manifest)?;
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let statuses: Vec<Status> = entries
        .par_iter()
        .map(|e| featurize_one(e, &audio_dir, &out_dir, &extractor, args.force))
        .collect();

    let report_path = out_dir.join(REPORT_FILE);
    let mut report = String::from("utterance_id\tstatus\tdetail\n");
    let (mut written, mut existing, mut short, mut failed) = (0, 0, 0, 0);
    for (entry, status) in entries.iter().zip(&statuses) {
        let id = &entry.utterance_id;
        match status {
            Status::Written => written += 1,
            Status::Existing => existing += 1,
            Status::TooShort(why) => {
                short += 1;
                log::warn!("skipping {id}: {why}");
                report.push_str(&format!("{id}\ttoo_short\t{why}\n"));
            }
            Status::Failed(why) => {
                failed += 1;
                eprintln!("{id}: {why}");
                report.push_str(&format!("{id}\tfailed\t{}\n", why.replace(['\t', '\n'], " ")));
            }
        }
    }
    fs::File::create(&report_path)
        .and_then(|mut f| f.write_all(report.as_bytes()))
        .with_context(|| format!("writing {}", report_path.display()))?;
    println!("features written {written}, already present {existing}, too short {short}, failed {failed}");
    Ok(failed)
}
