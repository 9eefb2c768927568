//! Connectionist temporal classification: loss, gradient and decoding.
//!
//! All probability arithmetic runs in log space; `f64::NEG_INFINITY`
//! represents probability zero.

mod decode;
mod loss;

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

pub use decode::{
    beam_search, beam_search_decode, beam_search_labels, greedy_decode, greedy_labels,
    BeamHypothesis,
};
pub use loss::{ctc_grad, ctc_loss, ctc_loss_and_grad, min_frames};

/// Row sums must be within this of 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// `ln(exp(a) + exp(b))`, exact for infinite arguments.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Per-frame distributions over the vocabulary, `T x V`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMatrix(Array2<f64>);

impl PosteriorMatrix {
    /// Validates that every entry lies in `[0, 1]` and every row sums to 1.
    pub fn new(probs: Array2<f64>) -> Result<Self> {
        for (t, row) in probs.axis_iter(Axis(0)).enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidArgument(format!(
                    "posterior row {t} has an entry outside [0, 1]"
                )));
            }
            let sum = row.sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidArgument(format!(
                    "posterior row {t} sums to {sum}"
                )));
            }
        }
        Ok(Self(probs))
    }

    /// Row-wise softmax of `logits`.
    pub fn from_logits(logits: ArrayView2<'_, f64>) -> Self {
        Self(softmax_rows(logits))
    }

    pub fn probs(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn frames(&self) -> usize {
        self.0.nrows()
    }

    pub fn vocab_size(&self) -> usize {
        self.0.ncols()
    }

    pub fn log_probs(&self) -> Array2<f64> {
        self.0.mapv(f64::ln)
    }
}

/// Stable row-wise softmax (max subtracted before exponentiation).
pub fn softmax_rows(logits: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        row.mapv_inplace(|x| (x - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|x| x / sum);
    }
    out
}

/// Stable row-wise log-softmax.
pub fn log_softmax_rows(logits: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let lse = max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|x| x - lse);
    }
    out
}

/// Merges runs of equal tokens, then removes blanks.
pub fn collapse(path: &[usize], blank: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &tok in path {
        if prev != Some(tok) && tok != blank {
            out.push(tok);
        }
        prev = Some(tok);
    }
    out
}
