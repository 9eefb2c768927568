//! Character-level speech recognition from raw WAV audio: silence clipping,
//! MFCC features, a convolutional / recurrent acoustic model trained with
//! CTC, beam-search decoding and character error rate evaluation.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ctc;
pub mod error;
pub mod features;
pub mod ingest;
pub mod metrics;
pub mod network;
pub mod preprocess;
pub mod synth;
pub mod textcodec;
pub mod training;

pub use ctc::PosteriorMatrix;
pub use error::{Error, Result};
pub use features::{FeatureMatrix, MfccConfig};
pub use ingest::{AudioSignal, ManifestEntry};
pub use metrics::EvalResult;
pub use network::{AcousticModel, Mode, NetworkConfig, ParameterStore};
pub use preprocess::ClipConfig;
pub use textcodec::{LabelSequence, Vocabulary};
pub use training::{TrainConfig, TrainingExample};
