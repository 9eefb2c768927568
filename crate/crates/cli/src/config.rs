//! Pipeline configuration file.
//!
//! A TOML document with optional `[paths]`, `[clip]`, `[mfcc]`, `[network]`,
//! `[train]` and `[decode]` sections. Missing keys take the library defaults;
//! unknown sections or keys are an error. Command-line flags override values
//! read here.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use npasr_core::features::MfccConfig;
use npasr_core::ingest::PIPELINE_SAMPLE_RATE;
use npasr_core::network::NetworkConfig;
use npasr_core::preprocess::ClipConfig;
use npasr_core::training::{TrainConfig, DEFAULT_TRAIN_FRACTION};
use serde::Deserialize;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsSection,
    pub clip: ClipSection,
    pub mfcc: MfccSection,
    pub network: NetworkSection,
    pub train: TrainSection,
    pub decode: DecodeSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    /// Directory holding the WAV files named by the manifest.
    pub data_dir: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub features_dir: Option<PathBuf>,
    pub checkpoint_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClipSection {
    pub window_length: usize,
}

impl Default for ClipSection {
    fn default() -> Self {
        Self {
            window_length: ClipConfig::default().window_length,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MfccSection {
    pub pre_emphasis: f64,
    pub sub_hop: usize,
    pub sub_window: usize,
    pub fft_size: usize,
    pub n_mels: usize,
    pub n_coeffs: usize,
    pub stack: usize,
    pub f_min: f64,
    pub f_max: f64,
}

impl Default for MfccSection {
    fn default() -> Self {
        let c = MfccConfig::default();
        Self {
            pre_emphasis: c.pre_emphasis,
            sub_hop: c.sub_hop,
            sub_window: c.sub_window,
            fft_size: c.fft_size,
            n_mels: c.n_mels,
            n_coeffs: c.n_coeffs,
            stack: c.stack,
            f_min: c.f_min,
            f_max: c.f_max,
        }
    }
}

/// Network shape. `input_dim` and `vocab_size` are not configurable: they
/// come from the features and the training vocabulary.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub conv_channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
    pub residual_blocks: usize,
    pub convs_per_block: usize,
    pub bilstm_layers: usize,
    pub hidden_size: usize,
    pub dropout_rate: f64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        let c = NetworkConfig::default();
        Self {
            conv_channels: c.conv_channels,
            kernel_size: c.kernel_size,
            stride: c.stride,
            residual_blocks: c.residual_blocks,
            convs_per_block: c.convs_per_block,
            bilstm_layers: c.bilstm_layers,
            hidden_size: c.hidden_size,
            dropout_rate: c.dropout_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub train_fraction: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let c = TrainConfig::default();
        Self {
            learning_rate: c.learning_rate,
            beta1: c.beta1,
            beta2: c.beta2,
            epsilon: c.epsilon,
            weight_decay: c.weight_decay,
            batch_size: c.batch_size,
            max_epochs: c.max_epochs,
            seed: c.seed,
            train_fraction: DEFAULT_TRAIN_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeSection {
    pub beam_width: usize,
    pub greedy: bool,
}

impl Default for DecodeSection {
    fn default() -> Self {
        Self {
            beam_width: 50,
            greedy: false,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Reads `path`, or returns the defaults when no file is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in config {}", path.display()))
    }

    /// Checks every section that does not depend on the data.
    pub fn validate(&self) -> Result<()> {
        self.clip_config()?;
        self.mfcc_config().validate(PIPELINE_SAMPLE_RATE)?;
        self.train_config().validate()?;
        // vocab_size is a placeholder until the vocabulary exists
        self.network_config(self.mfcc_config().feature_dim(), 2).validate()?;
        let f = self.train.train_fraction;
        anyhow::ensure!(f > 0.0 && f <= 1.0, "train_fraction {f} outside (0, 1]");
        anyhow::ensure!(self.decode.beam_width >= 1, "beam_width must be >= 1");
        Ok(())
    }

    pub fn clip_config(&self) -> Result<ClipConfig> {
        Ok(ClipConfig::new(self.clip.window_length)?)
    }

    pub fn mfcc_config(&self) -> MfccConfig {
        let m = &self.mfcc;
        MfccConfig {
            pre_emphasis: m.pre_emphasis,
            sub_hop: m.sub_hop,
            sub_window: m.sub_window,
            fft_size: m.fft_size,
            n_mels: m.n_mels,
            n_coeffs: m.n_coeffs,
            stack: m.stack,
            f_min: m.f_min,
            f_max: m.f_max,
        }
    }

    pub fn network_config(&self, input_dim: usize, vocab_size: usize) -> NetworkConfig {
        let n = &self.network;
        NetworkConfig {
            input_dim,
            conv_channels: n.conv_channels,
            kernel_size: n.kernel_size,
            stride: n.stride,
            residual_blocks: n.residual_blocks,
            convs_per_block: n.convs_per_block,
            bilstm_layers: n.bilstm_layers,
            hidden_size: n.hidden_size,
            dropout_rate: n.dropout_rate,
            vocab_size,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.learning_rate,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            weight_decay: t.weight_decay,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            seed: t.seed,
        }
    }
}

/// Flag value if given, else the `[paths]` value, else an error naming both.
pub fn require_path(
    flag: Option<PathBuf>,
    config: &Option<PathBuf>,
    flag_name: &str,
    key: &str,
) -> Result<PathBuf> {
    flag.or_else(|| config.clone())
        .with_context(|| format!("missing --{flag_name} (or paths.{key} in the config)"))
}
