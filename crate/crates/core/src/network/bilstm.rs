//! Bidirectional LSTM layer with inverted dropout on its output.

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::Rng;

use super::lstm::{lstm_backward, lstm_forward, reverse_time, LstmCache, LstmGrads, LstmWeights};
use super::Mode;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BiLstmCache {
    forward: LstmCache,
    backward: LstmCache,
    /// Scaled keep mask (`0` or `1 / (1 - rate)`), train mode only.
    mask: Option<Array2<f64>>,
}

/// Left-to-right and right-to-left passes concatenated per frame: `T x 2H`.
pub fn bilstm_forward<R: Rng + ?Sized>(
    x: ArrayView2<'_, f64>,
    fwd: &LstmWeights<'_>,
    bwd: &LstmWeights<'_>,
    dropout_rate: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<(Array2<f64>, BiLstmCache)> {
    if x.nrows() == 0 {
        return Err(Error::Empty("bilstm input"));
    }
    if !(0.0..1.0).contains(&dropout_rate) {
        return Err(Error::InvalidArgument(format!(
            "dropout rate {dropout_rate} outside [0, 1)"
        )));
    }
    let (hf, cf) = lstm_forward(x, fwd)?;
    let reversed = reverse_time(x);
    let (hb_rev, cb) = lstm_forward(reversed.view(), bwd)?;
    let hb = reverse_time(hb_rev.view());
    let mut out = concatenate(Axis(1), &[hf.view(), hb.view()]).expect("equal lengths");
    let mask = if mode == Mode::Train && dropout_rate > 0.0 {
        let keep = 1.0 / (1.0 - dropout_rate);
        let mask = Array2::from_shape_simple_fn(out.dim(), || {
            if rng.random::<f64>() < dropout_rate {
                0.0
            } else {
                keep
            }
        });
        out *= &mask;
        Some(mask)
    } else {
        None
    };
    Ok((
        out,
        BiLstmCache {
            forward: cf,
            backward: cb,
            mask,
        },
    ))
}

pub fn bilstm_backward(
    cache: &BiLstmCache,
    fwd: &LstmWeights<'_>,
    bwd: &LstmWeights<'_>,
    dy: ArrayView2<'_, f64>,
    fwd_grads: &mut LstmGrads<'_>,
    bwd_grads: &mut LstmGrads<'_>,
) -> Array2<f64> {
    let h = fwd.hidden_size();
    let dy = match &cache.mask {
        Some(mask) => &dy * mask,
        None => dy.to_owned(),
    };
    let dx_f = lstm_backward(&cache.forward, fwd, dy.slice(s![.., 0..h]), fwd_grads);
    let db_rev = reverse_time(dy.slice(s![.., h..2 * h]));
    let dx_b_rev = lstm_backward(&cache.backward, bwd, db_rev.view(), bwd_grads);
    dx_f + reverse_time(dx_b_rev.view())
}
