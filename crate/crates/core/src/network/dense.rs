//! Affine output layer followed by a row-wise softmax.

use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};

use crate::ctc::PosteriorMatrix;
use crate::error::{Error, Result};

/// `x · weights + bias`, with `weights` shaped `in x V`.
pub fn dense_forward(
    x: ArrayView2<'_, f64>,
    weights: ArrayView2<'_, f64>,
    bias: ArrayView1<'_, f64>,
) -> Result<Array2<f64>> {
    if x.ncols() != weights.nrows() || bias.len() != weights.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "dense input {:?} against weights {:?} and bias {}",
            x.dim(),
            weights.dim(),
            bias.len()
        )));
    }
    let mut y = x.dot(&weights);
    y += &bias;
    Ok(y)
}

pub fn dense_softmax_forward(
    x: ArrayView2<'_, f64>,
    weights: ArrayView2<'_, f64>,
    bias: ArrayView1<'_, f64>,
) -> Result<PosteriorMatrix> {
    let logits = dense_forward(x, weights, bias)?;
    Ok(PosteriorMatrix::from_logits(logits.view()))
}

/// Returns the input gradient and accumulates the parameter gradients.
pub fn dense_backward(
    x: ArrayView2<'_, f64>,
    weights: ArrayView2<'_, f64>,
    dy: ArrayView2<'_, f64>,
    mut dw: ArrayViewMut2<'_, f64>,
    mut db: ArrayViewMut1<'_, f64>,
) -> Array2<f64> {
    ndarray::linalg::general_mat_mul(1.0, &x.t(), &dy, 1.0, &mut dw);
    db += &dy.sum_axis(Axis(0));
    dy.dot(&weights.t())
}
