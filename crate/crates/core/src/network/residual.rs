//! Residual block: `G(x) + x`, where `G` stacks `[conv -> batch norm -> PReLU]`.

use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayView2, ArrayView3};

use super::conv::{conv1d_backward, conv1d_forward_cached, ConvCache};
use super::norm::{
    batchnorm_backward, batchnorm_forward, prelu_backward, prelu_forward, BatchNormCache,
    RunningStats,
};
use super::Mode;
use crate::error::{Error, Result};

/// Parameters of one `conv -> batch norm -> PReLU` layer.
#[derive(Debug, Clone)]
pub struct ConvLayerParams<'a> {
    /// `kernel x channels x channels`
    pub conv_weight: ArrayView3<'a, f64>,
    pub conv_bias: ArrayView1<'a, f64>,
    pub gamma: ArrayView1<'a, f64>,
    pub beta: ArrayView1<'a, f64>,
    pub slope: ArrayView1<'a, f64>,
    pub running: Option<RunningStats>,
}

/// Gradient accumulators matching [`ConvLayerParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayerGrads {
    pub conv_weight: Array3<f64>,
    pub conv_bias: Array1<f64>,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub slope: Array1<f64>,
}

impl ConvLayerGrads {
    pub fn zeros_like(p: &ConvLayerParams<'_>) -> Self {
        Self {
            conv_weight: Array3::zeros(p.conv_weight.dim()),
            conv_bias: Array1::zeros(p.conv_bias.len()),
            gamma: Array1::zeros(p.gamma.len()),
            beta: Array1::zeros(p.beta.len()),
            slope: Array1::zeros(p.slope.len()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConvLayerCache {
    conv: Vec<ConvCache>,
    bn: BatchNormCache,
    /// Batch-norm outputs, the PReLU inputs.
    normalized: Vec<Array2<f64>>,
}

impl ConvLayerCache {
    /// Batch `(mean, variance)` when the forward ran in train mode.
    pub fn batch_moments(&self) -> Option<&(Array1<f64>, Array1<f64>)> {
        self.bn.batch_moments.as_ref()
    }
}

/// One layer over a batch of sequences; batch-norm statistics span the batch.
pub fn conv_layer_forward(
    xs: &[ArrayView2<'_, f64>],
    params: &ConvLayerParams<'_>,
    mode: Mode,
) -> Result<(Vec<Array2<f64>>, ConvLayerCache)> {
    let mut conv_out = Vec::with_capacity(xs.len());
    let mut conv_caches = Vec::with_capacity(xs.len());
    for x in xs {
        let (y, c) = conv1d_forward_cached(*x, params.conv_weight, params.conv_bias, 1)?;
        conv_out.push(y);
        conv_caches.push(c);
    }
    let views: Vec<_> = conv_out.iter().map(|a| a.view()).collect();
    let (normalized, bn) =
        batchnorm_forward(&views, params.gamma, params.beta, mode, params.running.as_ref())?;
    let out = normalized
        .iter()
        .map(|n| prelu_forward(n.view(), params.slope))
        .collect();
    Ok((
        out,
        ConvLayerCache {
            conv: conv_caches,
            bn,
            normalized,
        },
    ))
}

pub fn conv_layer_backward(
    cache: &ConvLayerCache,
    params: &ConvLayerParams<'_>,
    dys: &[Array2<f64>],
    grads: &mut ConvLayerGrads,
) -> Vec<Array2<f64>> {
    let d_norm: Vec<Array2<f64>> = dys
        .iter()
        .zip(&cache.normalized)
        .map(|(dy, n)| prelu_backward(n.view(), params.slope, dy.view(), grads.slope.view_mut()))
        .collect();
    let d_conv = batchnorm_backward(
        &cache.bn,
        params.gamma,
        &d_norm,
        grads.gamma.view_mut(),
        grads.beta.view_mut(),
    );
    d_conv
        .iter()
        .zip(&cache.conv)
        .map(|(d, c)| {
            conv1d_backward(
                c,
                params.conv_weight,
                1,
                d.view(),
                grads.conv_weight.view_mut(),
                grads.conv_bias.view_mut(),
            )
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ResidualCache {
    pub layers: Vec<ConvLayerCache>,
}

/// `G(x) + x` for every sequence in the batch.
pub fn residual_block_forward(
    xs: &[ArrayView2<'_, f64>],
    layers: &[ConvLayerParams<'_>],
    mode: Mode,
) -> Result<(Vec<Array2<f64>>, ResidualCache)> {
    let mut current: Vec<Array2<f64>> = xs.iter().map(|x| x.to_owned()).collect();
    let mut caches = Vec::with_capacity(layers.len());
    for p in layers {
        let views: Vec<_> = current.iter().map(|a| a.view()).collect();
        let (next, cache) = conv_layer_forward(&views, p, mode)?;
        current = next;
        caches.push(cache);
    }
    for (g, x) in current.iter_mut().zip(xs) {
        if g.dim() != x.dim() {
            return Err(Error::DimensionMismatch(format!(
                "residual branch output {:?} against input {:?}",
                g.dim(),
                x.dim()
            )));
        }
        *g += x;
    }
    Ok((current, ResidualCache { layers: caches }))
}

/// Input gradient: the stacked-layer gradient plus the skip path.
pub fn residual_block_backward(
    cache: &ResidualCache,
    layers: &[ConvLayerParams<'_>],
    dys: &[Array2<f64>],
    grads: &mut [ConvLayerGrads],
) -> Vec<Array2<f64>> {
    let mut d = dys.to_vec();
    for ((c, p), g) in cache.layers.iter().zip(layers).zip(grads.iter_mut()).rev() {
        d = conv_layer_backward(c, p, &d, g);
    }
    for (dx, dy) in d.iter_mut().zip(dys) {
        *dx += dy;
    }
    d
}
