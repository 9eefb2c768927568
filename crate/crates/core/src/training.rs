//! Adam, dataset splitting, length-bucketed batching and the epoch loop.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{s, Array2, Array3, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ctc::{
    beam_search_labels, ctc_loss_and_grad, greedy_labels, log_softmax_rows, min_frames,
    PosteriorMatrix,
};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::ingest::ManifestEntry;
use crate::metrics::{aggregate_cer, EvalResult};
use crate::network::{save_checkpoint, AcousticModel, Mode, ParameterStore};
use crate::textcodec::{decode_ids, LabelSequence, Vocabulary};

pub const DEFAULT_SPLIT_SEED: u64 = 1234;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.95;
pub const METRICS_HEADER: &str = "epoch,train_loss,test_loss,test_cer";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// L2 coefficient added to the gradient; 0 disables it.
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
            batch_size: 80,
            max_epochs: 58,
            seed: DEFAULT_SPLIT_SEED,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} {b} outside [0, 1)"));
            }
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive".into());
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight_decay must be >= 0".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be >= 1".into());
        }
        Ok(())
    }
}

/// One Adam update with bias correction over every trainable parameter.
/// `step` counts from 1.
pub fn adam_step(params: &mut ParameterStore, config: &TrainConfig, step: u64) -> Result<()> {
    if step < 1 {
        return Err(Error::InvalidArgument("adam step count starts at 1".into()));
    }
    let b1 = config.beta1;
    let b2 = config.beta2;
    let c1 = 1.0 - b1.powf(step as f64);
    let c2 = 1.0 - b2.powf(step as f64);
    let m = params.moments_mut();
    for (i, entry) in m.entries.iter().enumerate() {
        if !entry.trainable {
            continue;
        }
        let values = &mut m.values[i];
        let first = &mut m.first[i];
        let second = &mut m.second[i];
        for (k, &g) in m.grads[i].iter().enumerate() {
            let g = g + config.weight_decay * values[k];
            first[k] = b1 * first[k] + (1.0 - b1) * g;
            second[k] = b2 * second[k] + (1.0 - b2) * g * g;
            let m_hat = first[k] / c1;
            let v_hat = second[k] / c2;
            values[k] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
        }
    }
    Ok(())
}

fn train_count(n: usize, train_fraction: f64) -> Result<usize> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 entries to split, got {n}"
        )));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    Ok(((n as f64 * train_fraction).round() as usize).clamp(1, n - 1))
}

/// Seeded shuffle, then the first `round(n * train_fraction)` items (at
/// least one on each side) form the training set.
pub fn split_dataset<T: Clone>(
    entries: &[T],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>)> {
    let n_train = train_count(entries.len(), train_fraction)?;
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |idx: &[usize]| idx.iter().map(|&i| entries[i].clone()).collect::<Vec<_>>();
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}

/// Like [`split_dataset`] but no speaker appears on both sides. Speakers are
/// shuffled and assigned to training until it holds the target count.
pub fn split_by_speaker(
    entries: &[ManifestEntry],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<ManifestEntry>, Vec<ManifestEntry>)> {
    let target = train_count(entries.len(), train_fraction)?;
    let mut by_speaker: BTreeMap<&str, Vec<&ManifestEntry>> = BTreeMap::new();
    for e in entries {
        by_speaker.entry(e.speaker_id.as_str()).or_default().push(e);
    }
    if by_speaker.len() < 2 {
        return Err(Error::InvalidArgument(
            "speaker-disjoint split needs at least 2 speakers".into(),
        ));
    }
    let mut speakers: Vec<&str> = by_speaker.keys().copied().collect();
    speakers.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, spk) in speakers.iter().enumerate() {
        let group = &by_speaker[spk];
        // keep at least one speaker for the test side
        let dest = if train.len() < target && i + 1 < speakers.len() {
            &mut train
        } else {
            &mut test
        };
        dest.extend(group.iter().map(|e| (*e).clone()));
    }
    Ok((train, test))
}

/// Features paired with the label ids of their transcription.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub utterance_id: String,
    pub features: FeatureMatrix,
    pub labels: LabelSequence,
    pub transcript: String,
}

impl TrainingExample {
    /// Whether the model emits enough frames for a CTC alignment.
    pub fn is_feasible(&self, output_frames: usize) -> bool {
        output_frames >= min_frames(self.labels.as_slice())
    }
}

/// Drops (with a warning) examples too short for their targets.
/// `output_frames` maps feature rows to model output frames.
pub fn filter_feasible(
    examples: Vec<TrainingExample>,
    output_frames: impl Fn(usize) -> usize,
) -> Vec<TrainingExample> {
    examples
        .into_iter()
        .filter(|e| {
            let frames = output_frames(e.features.num_frames());
            let ok = e.is_feasible(frames);
            if !ok {
                log::warn!(
                    "dropping {}: {} frames cannot align {} labels",
                    e.utterance_id,
                    frames,
                    e.labels.len()
                );
            }
            ok
        })
        .collect()
}

/// A zero-padded batch, `B x T_max x D`, with the true length of each row.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// Positions in the example list the batch was built from.
    pub indices: Vec<usize>,
    pub lengths: Vec<usize>,
    pub features: Array3<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// The unpadded frames of example `i`.
    pub fn example(&self, i: usize) -> ArrayView2<'_, f64> {
        self.features.slice(s![i, ..self.lengths[i], ..])
    }
}

/// Sorts by feature length (ties by utterance id), chunks into batches and
/// shuffles the batch order with `seed`.
pub fn make_batches(examples: &[TrainingExample], batch_size: usize, seed: u64) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be >= 1".into()));
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.sort_by(|&a, &b| {
        let (ea, eb) = (&examples[a], &examples[b]);
        ea.features
            .num_frames()
            .cmp(&eb.features.num_frames())
            .then_with(|| ea.utterance_id.cmp(&eb.utterance_id))
    });
    let mut batches = Vec::with_capacity(order.len().div_ceil(batch_size));
    for chunk in order.chunks(batch_size) {
        let lengths: Vec<usize> = chunk.iter().map(|&i| examples[i].features.num_frames()).collect();
        let t_max = lengths.iter().copied().max().unwrap_or(0);
        let dim = examples[chunk[0]].features.dim();
        let mut features = Array3::zeros((chunk.len(), t_max, dim));
        for (b, &i) in chunk.iter().enumerate() {
            let f = examples[i].features.view();
            if f.ncols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "{} has {} feature columns, batch has {dim}",
                    examples[i].utterance_id,
                    f.ncols()
                )));
            }
            features.slice_mut(s![b, ..lengths[b], ..]).assign(&f);
        }
        batches.push(Batch {
            indices: chunk.to_vec(),
            lengths,
            features,
        });
    }
    batches.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(batches)
}

/// Per-example CTC losses and their logit gradients scaled by `scale`.
fn losses_and_grads(
    logits: &[Array2<f64>],
    labels: &[&LabelSequence],
    blank: usize,
    scale: f64,
) -> Result<(Vec<f64>, Vec<Array2<f64>>)> {
    let mut losses = Vec::with_capacity(logits.len());
    let mut grads = Vec::with_capacity(logits.len());
    for (z, y) in logits.iter().zip(labels) {
        let lp = log_softmax_rows(z.view());
        let (loss, mut g) = ctc_loss_and_grad(lp.view(), y.as_slice(), blank)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite("training loss"));
        }
        g *= scale;
        losses.push(loss);
        grads.push(g);
    }
    Ok((losses, grads))
}

/// Forward in train mode, mean CTC loss, backward and one Adam update.
/// Returns the batch's mean loss.
pub fn train_step(
    model: &mut AcousticModel,
    batch: &Batch,
    examples: &[TrainingExample],
    blank: usize,
    config: &TrainConfig,
    step: u64,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let views: Vec<_> = (0..batch.len()).map(|i| batch.example(i)).collect();
    let labels: Vec<&LabelSequence> = batch.indices.iter().map(|&i| &examples[i].labels).collect();
    let logits = model.forward_batch(&views, Mode::Train)?;
    let (losses, grads) = losses_and_grads(&logits, &labels, blank, 1.0 / batch.len() as f64)?;
    model.params_mut().zero_grads();
    model.backward(&grads)?;
    adam_step(model.params_mut(), config, step)?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// One pass over `batches`. `step` is the number of Adam updates taken so
/// far and is advanced once per batch. Returns the mean batch loss.
pub fn train_epoch(
    model: &mut AcousticModel,
    batches: &[Batch],
    examples: &[TrainingExample],
    blank: usize,
    config: &TrainConfig,
    step: &mut u64,
) -> Result<f64> {
    if batches.is_empty() {
        return Err(Error::Empty("batch list"));
    }
    let mut total = 0.0;
    for batch in batches {
        *step += 1;
        total += train_step(model, batch, examples, blank, config, *step)?;
    }
    Ok(total / batches.len() as f64)
}

/// Inference-mode CTC loss of one example.
pub fn example_loss(model: &AcousticModel, example: &TrainingExample, blank: usize) -> Result<f64> {
    let logits = model.logits(example.features.view())?;
    let lp = log_softmax_rows(logits.view());
    Ok(ctc_loss_and_grad(lp.view(), example.labels.as_slice(), blank)?.0)
}

/// Mean inference-mode loss over `examples`.
pub fn mean_loss(model: &AcousticModel, examples: &[TrainingExample], blank: usize) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::Empty("example set"));
    }
    let mut total = 0.0;
    for e in examples {
        total += example_loss(model, e, blank)?;
    }
    Ok(total / examples.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decoder {
    Greedy,
    Beam(usize),
}

pub fn decode_posteriors(posteriors: &PosteriorMatrix, vocab: &Vocabulary, decoder: Decoder) -> Result<String> {
    let ids = match decoder {
        Decoder::Greedy => greedy_labels(posteriors, vocab.blank_id()),
        Decoder::Beam(width) => beam_search_labels(posteriors, vocab.blank_id(), width)?,
    };
    decode_ids(&ids, vocab)
}

/// Features to text with an inference-mode forward pass.
pub fn transcribe(
    model: &AcousticModel,
    features: &FeatureMatrix,
    vocab: &Vocabulary,
    decoder: Decoder,
) -> Result<String> {
    decode_posteriors(&model.predict(features)?, vocab, decoder)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Total edits over total reference characters.
    pub cer: f64,
    pub results: Vec<EvalResult>,
}

pub fn evaluate(
    model: &AcousticModel,
    examples: &[TrainingExample],
    vocab: &Vocabulary,
    decoder: Decoder,
) -> Result<Evaluation> {
    if examples.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let results = examples
        .iter()
        .map(|e| Ok(EvalResult::score(e.transcript.clone(), transcribe(model, &e.features, vocab, decoder)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation {
        cer: aggregate_cer(&results),
        results,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub test_cer: f64,
}

impl EpochMetrics {
    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.epoch, self.train_loss, self.test_loss, self.test_cer)
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Receives `metrics.csv`, `epoch_NNN.ckpt` and `best.ckpt` when set.
    pub out_dir: Option<PathBuf>,
    pub decoder: Decoder,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            out_dir: None,
            decoder: Decoder::Greedy,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub epochs: Vec<EpochMetrics>,
    /// Epoch with the lowest held-out loss so far, 1-based.
    pub best_epoch: usize,
    pub steps: u64,
}

pub fn checkpoint_name(epoch: usize) -> String {
    format!("epoch_{epoch:03}.ckpt")
}

pub const BEST_CHECKPOINT: &str = "best.ckpt";

/// Trains for `config.max_epochs`, scoring the held-out set after each
/// epoch. The best checkpoint tracks the minimum held-out loss.
pub fn fit(
    model: &mut AcousticModel,
    vocab: &Vocabulary,
    train: &[TrainingExample],
    test: &[TrainingExample],
    config: &TrainConfig,
    options: &FitOptions,
) -> Result<FitReport> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if model.config().vocab_size != vocab.len() {
        return Err(Error::DimensionMismatch(format!(
            "model vocab_size {} against vocabulary of {}",
            model.config().vocab_size,
            vocab.len()
        )));
    }
    let blank = vocab.blank_id();
    let mut metrics_file = match &options.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let path = dir.join("metrics.csv");
            let mut w = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
            writeln!(w, "{METRICS_HEADER}").map_err(|e| Error::io(&path, e))?;
            Some((w, path))
        }
        None => None,
    };

    model.reseed_dropout(config.seed);
    let mut step = 0;
    let mut best = f64::INFINITY;
    let mut report = FitReport {
        epochs: Vec::new(),
        best_epoch: 0,
        steps: 0,
    };
    for epoch in 1..=config.max_epochs {
        let batches = make_batches(train, config.batch_size, config.seed.wrapping_add(epoch as u64))?;
        let train_loss = train_epoch(model, &batches, train, blank, config, &mut step)?;
        model.clear_cache();
        let (test_loss, test_cer) = if test.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            (
                mean_loss(model, test, blank)?,
                evaluate(model, test, vocab, options.decoder)?.cer,
            )
        };
        let m = EpochMetrics {
            epoch,
            train_loss,
            test_loss,
            test_cer,
        };
        log::info!("{}", m.csv_row());
        // without a held-out set, fall back to the training loss
        let score = if test.is_empty() { train_loss } else { test_loss };
        let improved = score < best || report.best_epoch == 0;
        if improved {
            best = score;
            report.best_epoch = epoch;
        }
        if let Some((w, path)) = &mut metrics_file {
            writeln!(w, "{}", m.csv_row())
                .and_then(|()| w.flush())
                .map_err(|e| Error::io(path.as_path(), e))?;
        }
        if let Some(dir) = &options.out_dir {
            save_checkpoint(model, vocab, dir.join(checkpoint_name(epoch)))?;
            if improved {
                save_checkpoint(model, vocab, dir.join(BEST_CHECKPOINT))?;
            }
        }
        report.epochs.push(m);
    }
    report.steps = step;
    Ok(report)
}

/// Path of the metrics file written by [`fit`].
pub fn metrics_path(out_dir: &Path) -> PathBuf {
    out_dir.join("metrics.csv")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkConfig;
    use crate::textcodec::{build_vocab, encode};

    fn scalar_store(value: f64, grad: f64) -> (ParameterStore, crate::network::ParamId) {
        let mut store = ParameterStore::new();
        let id = store.add("w", &[1], vec![value], true).unwrap();
        store.grad_mut(id)[0] = grad;
        (store, id)
    }

    #[test]
    fn adam_first_step() {
        let cfg = TrainConfig::default();
        let (mut store, id) = scalar_store(0.5, 1.0);
        adam_step(&mut store, &cfg, 1).unwrap();
        assert!(((0.5 - store.value(id)[0]) - 0.001).abs() < 1e-6);
        for c in [0.05, 0.7, 42.0] {
            let (mut store, id) = scalar_store(0.0, c);
            adam_step(&mut store, &cfg, 1).unwrap();
            assert!((store.value(id)[0] + cfg.learning_rate).abs() < cfg.learning_rate * 1e-6);
        }
        // exact first step is lr * c / (c + eps); only for small c does eps show
        for c in [1e-6, 1e-3] {
            let (mut store, id) = scalar_store(0.0, c);
            adam_step(&mut store, &cfg, 1).unwrap();
            let exact = -cfg.learning_rate * c / (c + cfg.epsilon);
            assert!((store.value(id)[0] - exact).abs() < 1e-15);
        }
    }

    #[test]
    fn adam_zero_gradient_and_buffers() {
        let cfg = TrainConfig::default();
        let mut store = ParameterStore::new();
        let w = store.add("w", &[2], vec![0.3, -0.2], true).unwrap();
        let buf = store.add("stats", &[1], vec![5.0], false).unwrap();
        store.grad_mut(buf)[0] = 1.0;
        adam_step(&mut store, &cfg, 1).unwrap();
        assert_eq!(store.value(w), &[0.3, -0.2]);
        assert_eq!(store.value(buf), &[5.0]);
        assert!(adam_step(&mut store, &cfg, 0).is_err());
    }

    #[test]
    fn adam_weight_decay_adds_to_gradient() {
        let cfg = TrainConfig {
            weight_decay: 0.1,
            ..TrainConfig::default()
        };
        let (mut store, id) = scalar_store(2.0, 0.0);
        adam_step(&mut store, &cfg, 1).unwrap();
        assert!(store.value(id)[0] < 2.0);
    }

    #[test]
    fn split_counts_and_partition() {
        let items: Vec<usize> = (0..100).collect();
        let (train, test) = split_dataset(&items, 0.95, 1234).unwrap();
        assert_eq!((train.len(), test.len()), (95, 5));
        let (train2, test2) = split_dataset(&items, 0.95, 1234).unwrap();
        assert_eq!((&train, &test), (&train2, &test2));
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, items);
        assert!(split_dataset(&[1], 0.5, 0).is_err());
        assert!(split_dataset(&items, 1.0, 0).is_err());
        let (a, b) = split_dataset(&[1, 2], 0.99, 0).unwrap();
        assert_eq!((a.len(), b.len()), (1, 1));
    }

    #[test]
    fn speaker_split_is_disjoint() {
        let entries: Vec<ManifestEntry> = (0..40)
            .map(|i| ManifestEntry::new(format!("u{i}"), format!("s{}", i % 7), "x"))
            .collect();
        let (train, test) = split_by_speaker(&entries, 0.8, 3).unwrap();
        assert_eq!(train.len() + test.len(), 40);
        assert!(!test.is_empty());
        for t in &test {
            assert!(train.iter().all(|r| r.speaker_id != t.speaker_id));
        }
    }

    fn example(id: &str, frames: usize, text: &str, vocab: &Vocabulary) -> TrainingExample {
        let f = Array2::from_shape_fn((frames, 3), |(i, j)| (i * 3 + j) as f64 * 0.1 + 1.0);
        TrainingExample {
            utterance_id: id.into(),
            features: FeatureMatrix::new(f, 100.0),
            labels: encode(text, vocab),
            transcript: text.into(),
        }
    }

    #[test]
    fn batching_rules() {
        let vocab = build_vocab(&["ab"]).unwrap();
        let examples: Vec<_> = [5, 3, 9, 4, 7]
            .iter()
            .enumerate()
            .map(|(i, &t)| example(&format!("u{i}"), t, "ab", &vocab))
            .collect();
        let batches = make_batches(&examples, 2, 7).unwrap();
        let mut sizes: Vec<usize> = batches.iter().map(Batch::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 2, 2]);
        for b in &batches {
            assert_eq!(b.features.dim().1, *b.lengths.iter().max().unwrap());
            for (k, &i) in b.indices.iter().enumerate() {
                assert_eq!(b.example(k), examples[i].features.view());
                assert!(b.features.slice(s![k, b.lengths[k].., ..]).iter().all(|&v| v == 0.0));
            }
        }
        // bucketing: lengths within a batch are adjacent in sorted order
        let mut pairs: Vec<Vec<usize>> = batches.iter().map(|b| b.lengths.clone()).collect();
        pairs.sort();
        assert_eq!(pairs, vec![vec![3, 4], vec![5, 7], vec![9]]);
        assert_eq!(make_batches(&examples, 2, 7).unwrap(), batches);
    }

    #[test]
    fn infeasible_examples_dropped() {
        let vocab = build_vocab(&["ab"]).unwrap();
        let kept = filter_feasible(
            vec![
                example("ok", 3, "ab", &vocab),
                example("short", 2, "aa", &vocab),
                example("fits", 3, "aa", &vocab),
            ],
            |t| t,
        );
        let ids: Vec<_> = kept.iter().map(|e| e.utterance_id.as_str()).collect();
        assert_eq!(ids, ["ok", "fits"]);
    }

    fn tiny_model(vocab: &Vocabulary) -> AcousticModel {
        AcousticModel::new(
            NetworkConfig {
                input_dim: 3,
                conv_channels: 4,
                residual_blocks: 1,
                bilstm_layers: 1,
                hidden_size: 4,
                vocab_size: vocab.len(),
                ..NetworkConfig::default()
            },
            11,
        )
        .unwrap()
    }

    #[test]
    fn empty_inputs_rejected() {
        let vocab = build_vocab(&["ab"]).unwrap();
        let mut model = tiny_model(&vocab);
        let mut step = 0;
        assert!(train_epoch(&mut model, &[], &[], vocab.blank_id(), &TrainConfig::default(), &mut step).is_err());
        assert!(evaluate(&model, &[], &vocab, Decoder::Greedy).is_err());
        let bad = TrainConfig {
            max_epochs: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let vocab = build_vocab(&["ab"]).unwrap();
        let examples = vec![example("u0", 8, "ab", &vocab), example("u1", 9, "ba", &vocab)];
        let config = TrainConfig {
            learning_rate: 0.01,
            batch_size: 2,
            max_epochs: 15,
            ..TrainConfig::default()
        };
        let run = || {
            let mut model = tiny_model(&vocab);
            fit(&mut model, &vocab, &examples, &examples[..1], &config, &FitOptions::default()).unwrap()
        };
        let a = run();
        assert_eq!(a, run());
        assert_eq!(a.steps, 15);
        assert!(a.epochs.last().unwrap().train_loss < a.epochs[0].train_loss);
        assert!(a.epochs.iter().all(|m| m.train_loss.is_finite()));
    }
}
