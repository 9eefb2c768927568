//! Temporal (1-D) convolution with "same" zero padding.

use ndarray::{s, Array2, ArrayView1, ArrayView2, ArrayView3, Axis};

use crate::error::{Error, Result};

/// Output length `ceil(T / stride)`.
pub fn conv_output_len(t: usize, stride: usize) -> usize {
    t.div_ceil(stride)
}

/// Left zero padding; any odd remainder goes to the right edge.
fn left_pad(t: usize, kernel: usize, stride: usize) -> usize {
    let out = conv_output_len(t, stride);
    let total = ((out.max(1) - 1) * stride + kernel).saturating_sub(t);
    total / 2
}

/// Cached state for the backward pass.
#[derive(Debug, Clone)]
pub struct ConvCache {
    /// Unfolded input, `T' x (kernel * c_in)`.
    cols: Array2<f64>,
    input_len: usize,
}

fn unfold(x: ArrayView2<'_, f64>, kernel: usize, stride: usize) -> Array2<f64> {
    let (t, c_in) = x.dim();
    let out = conv_output_len(t, stride);
    let pad = left_pad(t, kernel, stride);
    let mut cols = Array2::zeros((out, kernel * c_in));
    for o in 0..out {
        for j in 0..kernel {
            let src = (o * stride + j) as isize - pad as isize;
            if src >= 0 && (src as usize) < t {
                cols.slice_mut(s![o, j * c_in..(j + 1) * c_in])
                    .assign(&x.row(src as usize));
            }
        }
    }
    cols
}

fn check_shapes(
    x: &ArrayView2<'_, f64>,
    weights: &ArrayView3<'_, f64>,
    bias: &ArrayView1<'_, f64>,
    stride: usize,
) -> Result<()> {
    let (_, c_in, c_out) = weights.dim();
    if x.ncols() != c_in {
        return Err(Error::DimensionMismatch(format!(
            "conv input has {} channels, weights expect {c_in}",
            x.ncols()
        )));
    }
    if bias.len() != c_out {
        return Err(Error::DimensionMismatch(format!(
            "conv bias has {} entries, weights produce {c_out} channels",
            bias.len()
        )));
    }
    if stride == 0 {
        return Err(Error::InvalidArgument("conv stride must be >= 1".into()));
    }
    Ok(())
}

/// Cross-correlation along time. `weights` is `kernel x c_in x c_out`.
pub fn conv1d_forward(
    x: ArrayView2<'_, f64>,
    weights: ArrayView3<'_, f64>,
    bias: ArrayView1<'_, f64>,
    stride: usize,
) -> Result<Array2<f64>> {
    Ok(conv1d_forward_cached(x, weights, bias, stride)?.0)
}

pub fn conv1d_forward_cached(
    x: ArrayView2<'_, f64>,
    weights: ArrayView3<'_, f64>,
    bias: ArrayView1<'_, f64>,
    stride: usize,
) -> Result<(Array2<f64>, ConvCache)> {
    check_shapes(&x, &weights, &bias, stride)?;
    let (kernel, c_in, c_out) = weights.dim();
    let w = weights
        .to_shape((kernel * c_in, c_out))
        .expect("contiguous conv weights");
    let cols = unfold(x, kernel, stride);
    let mut y = cols.dot(&w);
    y += &bias;
    Ok((
        y,
        ConvCache {
            cols,
            input_len: x.nrows(),
        },
    ))
}

/// Returns the input gradient and accumulates into `dw` (`kernel x c_in x c_out`
/// flattened to `kernel*c_in x c_out`) and `db`.
pub fn conv1d_backward(
    cache: &ConvCache,
    weights: ArrayView3<'_, f64>,
    stride: usize,
    dy: ArrayView2<'_, f64>,
    mut dw: ndarray::ArrayViewMut3<'_, f64>,
    mut db: ndarray::ArrayViewMut1<'_, f64>,
) -> Array2<f64> {
    let (kernel, c_in, c_out) = weights.dim();
    let w = weights
        .to_shape((kernel * c_in, c_out))
        .expect("contiguous conv weights");
    {
        let mut dw2 = dw
            .view_mut()
            .into_shape_with_order((kernel * c_in, c_out))
            .expect("contiguous conv gradient");
        ndarray::linalg::general_mat_mul(1.0, &cache.cols.t(), &dy, 1.0, &mut dw2);
    }
    db += &dy.sum_axis(Axis(0));

    let dcols = dy.dot(&w.t());
    let t = cache.input_len;
    let pad = left_pad(t, kernel, stride);
    let mut dx = Array2::zeros((t, c_in));
    for o in 0..dcols.nrows() {
        for j in 0..kernel {
            let src = (o * stride + j) as isize - pad as isize;
            if src >= 0 && (src as usize) < t {
                let mut row = dx.row_mut(src as usize);
                row += &dcols.slice(s![o, j * c_in..(j + 1) * c_in]);
            }
        }
    }
    dx
}
