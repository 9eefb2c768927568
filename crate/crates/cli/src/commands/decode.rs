//! `npasr transcribe` and `npasr evaluate`.

use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use npasr_core::features::{read_feature_cache, MfccExtractor};
use npasr_core::ingest::{load_wav, parse_manifest, PIPELINE_SAMPLE_RATE};
use npasr_core::metrics::{aggregate_cer, EvalResult};
use npasr_core::network::{load_checkpoint, AcousticModel};
use npasr_core::preprocess::clip_silence;
use npasr_core::textcodec::Vocabulary;
use npasr_core::training::transcribe as transcribe_features;
use rayon::prelude::*;

use super::{decoder_for, feature_path, Failures};
use crate::config::{require_path, PipelineConfig};
use crate::{EvaluateArgs, TranscribeArgs};

pub const REPORT_HEADER: &str = "utterance_id\treference\thypothesis\tedits\tcer";

fn load_model(path: &Path) -> Result<(AcousticModel, Vocabulary)> {
    load_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn utterance_id(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn transcribe(args: TranscribeArgs, config: &PipelineConfig) -> Result<Failures> {
    let (model, vocab) = load_model(&args.checkpoint)?;
    let decoder = decoder_for(args.decode.beam_width, args.decode.greedy, config);
    let clip = config.clip_config()?;
    let extractor = MfccExtractor::new(config.mfcc_config(), PIPELINE_SAMPLE_RATE)?;
    let dim = extractor.config().feature_dim();
    if dim != model.config().input_dim {
        bail!(
            "config produces {dim}-dim features but the checkpoint expects {}",
            model.config().input_dim
        );
    }
    let paths: Vec<PathBuf> = if args.stdin_list {
        std::io::stdin()
            .lock()
            .lines()
            .map(|l| l.map(|l| l.trim().to_owned()))
            .filter(|l| !matches!(l, Ok(s) if s.is_empty()))
            .map(|l| l.map(PathBuf::from))
            .collect::<std::io::Result<_>>()
            .context("reading paths from stdin")?
    } else {
        args.wavs
    };

    let texts: Vec<Result<String>> = paths
        .par_iter()
        .map(|p| {
            let signal = load_wav(p)?;
            signal.require_pipeline_rate()?;
            let features = extractor.extract(&clip_silence(&signal, clip))?;
            Ok(transcribe_features(&model, &features, &vocab, decoder)?)
        })
        .collect();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut failures = 0;
    for (path, text) in paths.iter().zip(texts) {
        match text {
            Ok(t) => writeln!(out, "{}\t{t}", utterance_id(path))?,
            Err(e) => {
                failures += 1;
                eprintln!("{}: {e:#}", path.display());
            }
        }
    }
    out.flush()?;
    Ok(failures)
}

fn tsv_field(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

pub fn evaluate(args: EvaluateArgs, config: &PipelineConfig) -> Result<Failures> {
    let manifest = require_path(args.manifest, &config.paths.manifest, "manifest", "manifest")?;
    let features_dir = require_path(args.features_dir, &config.paths.features_dir, "features-dir", "features_dir")?;
    let (model, vocab) = load_model(&args.checkpoint)?;
    let decoder = decoder_for(args.decode.beam_width, args.decode.greedy, config);
    let entries = parse_manifest(&manifest)?;
    let input_dim = model.config().input_dim;

    let scored: Vec<Result<EvalResult>> = entries
        .par_iter()
        .map(|e| {
            let features = read_feature_cache(feature_path(&features_dir, &e.utterance_id))?;
            if features.dim() != input_dim {
                bail!("{}-dim features, checkpoint expects {input_dim}", features.dim());
            }
            let hyp = transcribe_features(&model, &features, &vocab, decoder)?;
            Ok(EvalResult::score(e.transcription.clone(), hyp))
        })
        .collect();

    let mut report = format!("{REPORT_HEADER}\n");
    let mut ok = Vec::new();
    let mut failures = 0;
    for (entry, result) in entries.iter().zip(scored) {
        let id = &entry.utterance_id;
        match result {
            Ok(r) => {
                report.push_str(&format!(
                    "{id}\t{}\t{}\t{}\t{}\n",
                    tsv_field(&r.reference),
                    tsv_field(&r.hypothesis),
                    r.edits,
                    r.cer
                ));
                ok.push(r);
            }
            Err(e) => {
                failures += 1;
                eprintln!("{id}: {e:#}");
                report.push_str(&format!("{id}\t{}\t\tERROR\t{}\n", tsv_field(&entry.transcription), tsv_field(&format!("{e:#}"))));
            }
        }
    }
    fs::write(&args.report, report).with_context(|| format!("writing {}", args.report.display()))?;
    let edits: usize = ok.iter().map(|r| r.edits).sum();
    let chars: usize = ok.iter().map(EvalResult::reference_len).sum();
    println!(
        "CER {:.6} ({edits} edits / {chars} reference characters) over {} utterances, {failures} errors",
        aggregate_cer(&ok),
        ok.len()
    );
    Ok(failures)
}
