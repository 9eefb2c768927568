//! `npasr train`: split, build the vocabulary and fit.

use std::fs;

use anyhow::{bail, Context, Result};
use npasr_core::features::{read_feature_cache, FeatureMatrix};
use npasr_core::ingest::{parse_manifest, ManifestEntry};
use npasr_core::network::{count_params, AcousticModel};
use npasr_core::textcodec::{build_vocab, encode, Vocabulary};
use npasr_core::training::{
    filter_feasible, fit, split_dataset, FitOptions, TrainingExample,
};

use super::{decoder_for, feature_path, Failures};
use crate::config::{require_path, PipelineConfig};
use crate::TrainArgs;

pub const VOCAB_FILE: &str = "vocab.txt";

fn examples(items: &[(ManifestEntry, FeatureMatrix)], vocab: &Vocabulary) -> Vec<TrainingExample> {
    items
        .iter()
        .map(|(e, f)| TrainingExample {
            utterance_id: e.utterance_id.clone(),
            features: f.clone(),
            labels: encode(&e.transcription, vocab),
            transcript: e.transcription.clone(),
        })
        .collect()
}

pub fn run(args: TrainArgs, config: &PipelineConfig) -> Result<Failures> {
    let features_dir = require_path(args.features_dir, &config.paths.features_dir, "features-dir", "features_dir")?;
    let manifest = require_path(args.manifest, &config.paths.manifest, "manifest", "manifest")?;
    let out_dir = require_path(args.out_dir, &config.paths.checkpoint_dir, "out-dir", "checkpoint_dir")?;
    let mut train_config = config.train_config();
    if let Some(seed) = args.seed {
        train_config.seed = seed;
    }
    if let Some(epochs) = args.max_epochs {
        train_config.max_epochs = epochs;
    }
    train_config.validate()?;

    let mut failures = 0;
    let mut loaded = Vec::new();
    for entry in parse_manifest(&manifest)? {
        match read_feature_cache(feature_path(&features_dir, &entry.utterance_id)) {
            Ok(f) => loaded.push((entry, f)),
            Err(e) => {
                failures += 1;
                eprintln!("{}: {e}", entry.utterance_id);
            }
        }
    }
    if loaded.is_empty() {
        bail!("no feature caches could be read");
    }
    let dim = loaded[0].1.dim();
    if let Some((e, f)) = loaded.iter().find(|(_, f)| f.dim() != dim) {
        bail!("{} has {}-dim features, expected {dim}", e.utterance_id, f.dim());
    }

    let fraction = config.train.train_fraction;
    let (train_items, test_items) = if fraction >= 1.0 || loaded.len() < 2 {
        (loaded, Vec::new())
    } else {
        split_dataset(&loaded, fraction, train_config.seed)?
    };
    let vocab = build_vocab(&train_items.iter().map(|(e, _)| e.transcription.as_str()).collect::<Vec<_>>())?;
    let network = config.network_config(dim, vocab.len());
    network.validate()?;

    let train = filter_feasible(examples(&train_items, &vocab), |t| network.output_frames(t));
    let test = filter_feasible(examples(&test_items, &vocab), |t| network.output_frames(t));
    if train.is_empty() {
        bail!("no feasible training examples");
    }
    log::info!(
        "{} train / {} held-out utterances, vocabulary of {}, {} parameters",
        train.len(),
        test.len(),
        vocab.len(),
        count_params(&network)
    );

    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    vocab.save(out_dir.join(VOCAB_FILE))?;
    let mut model = AcousticModel::new(network, train_config.seed)?;
    let options = FitOptions {
        out_dir: Some(out_dir),
        decoder: decoder_for(None, false, config),
    };
    let report = fit(&mut model, &vocab, &train, &test, &train_config, &options)?;
    let best = &report.epochs[report.best_epoch - 1];
    println!(
        "trained {} epochs ({} steps); best epoch {} with train loss {:.4}, held-out loss {:.4}, held-out CER {:.4}",
        report.epochs.len(),
        report.steps,
        report.best_epoch,
        best.train_loss,
        best.test_loss,
        best.test_cer
    );
    Ok(failures)
}
