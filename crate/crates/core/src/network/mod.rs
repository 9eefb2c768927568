//! The acoustic model: an input convolution, residual blocks of
//! convolution / batch norm / PReLU, a BiLSTM stack and a softmax output
//! layer, each with a hand-written backward pass.

mod bilstm;
mod checkpoint;
mod conv;
mod dense;
mod lstm;
mod model;
mod norm;
mod params;
mod residual;

use std::fmt::Write as _;

use crate::error::{Error, Result};

pub use bilstm::{bilstm_backward, bilstm_forward, BiLstmCache};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use conv::{conv1d_backward, conv1d_forward, conv1d_forward_cached, conv_output_len, ConvCache};
pub use dense::{dense_backward, dense_forward, dense_softmax_forward};
pub use lstm::{
    lstm_backward, lstm_forward, lstm_step, reverse_time, sigmoid, LstmCache, LstmGrads,
    LstmWeights,
};
pub use model::AcousticModel;
pub use norm::{
    batchnorm_backward, batchnorm_forward, prelu_backward, prelu_forward, BatchNormCache,
    RunningStats, BN_EPSILON, BN_MOMENTUM,
};
pub use params::{Grads, ParamEntry, ParamId, ParameterStore, Values};
pub use residual::{
    conv_layer_backward, conv_layer_forward, residual_block_backward, residual_block_forward,
    ConvLayerCache, ConvLayerGrads, ConvLayerParams, ResidualCache,
};

/// Batch statistics and dropout in `Train`; running statistics and no
/// dropout in `Infer`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub conv_channels: usize,
    pub kernel_size: usize,
    /// Stride of the input convolution. Residual convolutions always use 1.
    pub stride: usize,
    pub residual_blocks: usize,
    pub convs_per_block: usize,
    pub bilstm_layers: usize,
    /// Per direction.
    pub hidden_size: usize,
    pub dropout_rate: f64,
    pub vocab_size: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            input_dim: 52,
            conv_channels: 64,
            kernel_size: 3,
            stride: 1,
            residual_blocks: 5,
            convs_per_block: 2,
            bilstm_layers: 2,
            hidden_size: 200,
            dropout_rate: 0.25,
            vocab_size: 66,
        }
    }
}

const CONFIG_KEYS: [&str; 10] = [
    "input_dim",
    "conv_channels",
    "kernel_size",
    "stride",
    "residual_blocks",
    "convs_per_block",
    "bilstm_layers",
    "hidden_size",
    "dropout_rate",
    "vocab_size",
];

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("input_dim", self.input_dim),
            ("conv_channels", self.conv_channels),
            ("kernel_size", self.kernel_size),
            ("stride", self.stride),
            ("convs_per_block", self.convs_per_block),
            ("bilstm_layers", self.bilstm_layers),
            ("hidden_size", self.hidden_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        if self.vocab_size < 2 {
            return Err(Error::InvalidConfig("vocab_size must be >= 2".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig(format!(
                "dropout_rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    /// Frames produced for `input_frames` feature rows.
    pub fn output_frames(&self, input_frames: usize) -> usize {
        conv_output_len(input_frames, self.stride)
    }

    /// One `key=value` line per field.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let ints = [
            self.input_dim,
            self.conv_channels,
            self.kernel_size,
            self.stride,
            self.residual_blocks,
            self.convs_per_block,
            self.bilstm_layers,
            self.hidden_size,
        ];
        for (k, v) in CONFIG_KEYS.iter().zip(ints) {
            let _ = writeln!(s, "{k}={v}");
        }
        let _ = writeln!(s, "dropout_rate={}", self.dropout_rate);
        let _ = writeln!(s, "vocab_size={}", self.vocab_size);
        s
    }

    /// Parses [`NetworkConfig::to_text`] output. Every key must be present
    /// exactly once.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut values: [Option<&str>; 10] = [None; 10];
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("config line without '=': {line}")))?;
            let idx = CONFIG_KEYS
                .iter()
                .position(|c| *c == k.trim())
                .ok_or_else(|| Error::Format(format!("unknown config key {k}")))?;
            if values[idx].replace(v.trim()).is_some() {
                return Err(Error::Format(format!("duplicate config key {k}")));
            }
        }
        let get = |i: usize| -> Result<&str> {
            values[i].ok_or_else(|| Error::Format(format!("missing config key {}", CONFIG_KEYS[i])))
        };
        let int = |i: usize| -> Result<usize> {
            get(i)?
                .parse()
                .map_err(|e| Error::Format(format!("{}: {e}", CONFIG_KEYS[i])))
        };
        let config = Self {
            input_dim: int(0)?,
            conv_channels: int(1)?,
            kernel_size: int(2)?,
            stride: int(3)?,
            residual_blocks: int(4)?,
            convs_per_block: int(5)?,
            bilstm_layers: int(6)?,
            hidden_size: int(7)?,
            dropout_rate: get(8)?
                .parse()
                .map_err(|e| Error::Format(format!("dropout_rate: {e}")))?,
            vocab_size: int(9)?,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Trainable scalars in a model built from `config` (running statistics
/// excluded).
pub fn count_params(config: &NetworkConfig) -> usize {
    let n = config.conv_channels;
    let k = config.kernel_size;
    let h = config.hidden_size;
    let input_conv = k * config.input_dim * n + n;
    // conv weights and bias, gamma, beta, PReLU slope
    let conv_layer = k * n * n + n + 3 * n;
    let blocks = config.residual_blocks * config.convs_per_block * conv_layer;
    let lstm_direction = |input: usize| 4 * h * (input + h + 1);
    let lstm: usize = (0..config.bilstm_layers)
        .map(|l| 2 * lstm_direction(if l == 0 { n } else { 2 * h }))
        .sum();
    let dense = 2 * h * config.vocab_size + config.vocab_size;
    input_conv + blocks + lstm + dense
}
