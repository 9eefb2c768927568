//! The five-utterance overfit experiment.
#![allow(dead_code)]

use std::time::{Duration, Instant};

use npasr_core::features::{extract_features, MfccConfig};
use npasr_core::network::{AcousticModel, NetworkConfig};
use npasr_core::synth::smoke_corpus;
use npasr_core::textcodec::{build_vocab, encode, Vocabulary};
use npasr_core::training::{
    evaluate, make_batches, mean_loss, train_epoch, Decoder, TrainConfig, TrainingExample,
};

pub const MAX_STEPS: u64 = 500;

pub struct Outcome {
    pub steps: u64,
    pub cer: f64,
    pub beam_cer: f64,
    pub loss: f64,
    pub elapsed: Duration,
    pub vocab_size: usize,
    pub model: AcousticModel,
    pub vocab: Vocabulary,
    pub examples: Vec<TrainingExample>,
}

pub fn corpus() -> (Vec<TrainingExample>, Vocabulary) {
    let corpus = smoke_corpus().unwrap();
    let texts: Vec<&str> = corpus.iter().map(|(_, t, _)| t.as_str()).collect();
    let vocab = build_vocab(&texts).unwrap();
    let examples = corpus
        .iter()
        .map(|(id, text, audio)| TrainingExample {
            utterance_id: id.clone(),
            features: extract_features(audio, &MfccConfig::default()).unwrap(),
            labels: encode(text, &vocab),
            transcript: text.clone(),
        })
        .collect();
    (examples, vocab)
}

pub fn train_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 0.005,
        batch_size: 5,
        max_epochs: 100,
        seed: 1234,
        ..TrainConfig::default()
    }
}

pub fn network_config(vocab_size: usize) -> NetworkConfig {
    NetworkConfig {
        conv_channels: 16,
        hidden_size: 32,
        vocab_size,
        ..NetworkConfig::default()
    }
}

/// Trains until the training set decodes perfectly with loss below 0.1, or
/// the step budget runs out.
pub fn run() -> Outcome {
    let start = Instant::now();
    let (examples, vocab) = corpus();
    let config = train_config();
    let mut model = AcousticModel::new(network_config(vocab.len()), 7).unwrap();
    model.reseed_dropout(config.seed);
    let blank = vocab.blank_id();
    let mut steps = 0;
    let mut epoch = 0;
    let (mut cer, mut loss) = (f64::INFINITY, f64::INFINITY);
    while steps < MAX_STEPS {
        epoch += 1;
        let batches = make_batches(&examples, config.batch_size, config.seed + epoch).unwrap();
        train_epoch(&mut model, &batches, &examples, blank, &config, &mut steps).unwrap();
        cer = evaluate(&model, &examples, &vocab, Decoder::Greedy).unwrap().cer;
        loss = mean_loss(&model, &examples, blank).unwrap();
        if cer == 0.0 && loss < 0.1 {
            break;
        }
    }
    let beam_cer = evaluate(&model, &examples, &vocab, Decoder::Beam(8)).unwrap().cer;
    Outcome {
        steps,
        cer,
        beam_cer,
        loss,
        elapsed: start.elapsed(),
        vocab_size: vocab.len(),
        model,
        vocab,
        examples,
    }
}
