//! Batch normalization and the parametric ReLU that follows it.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

use super::Mode;
use crate::error::{Error, Result};

pub const BN_EPSILON: f64 = 1e-5;
/// Weight of the old running statistic in each update.
pub const BN_MOMENTUM: f64 = 0.99;

/// Running mean and variance used in inference mode.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Array1<f64>,
    pub var: Array1<f64>,
}

impl RunningStats {
    /// `running = momentum * running + (1 - momentum) * batch`.
    pub fn update(&mut self, batch_mean: &Array1<f64>, batch_var: &Array1<f64>) {
        Zip::from(&mut self.mean)
            .and(batch_mean)
            .for_each(|r, &b| *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * b);
        Zip::from(&mut self.var)
            .and(batch_var)
            .for_each(|r, &b| *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * b);
    }
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    xhat: Vec<Array2<f64>>,
    inv_std: Array1<f64>,
    /// Statistics came from the batch (train mode) rather than running stats.
    batch_stats: bool,
    /// `(mean, biased variance)` of the batch, present in train mode.
    pub batch_moments: Option<(Array1<f64>, Array1<f64>)>,
}

/// Normalizes each channel over every time step of every sequence.
///
/// In train mode the statistics come from the batch (biased variance) and
/// are returned in the cache for the caller to fold into its running
/// statistics; in infer mode `running` is required.
pub fn batchnorm_forward(
    xs: &[ArrayView2<'_, f64>],
    gamma: ArrayView1<'_, f64>,
    beta: ArrayView1<'_, f64>,
    mode: Mode,
    running: Option<&RunningStats>,
) -> Result<(Vec<Array2<f64>>, BatchNormCache)> {
    let c = gamma.len();
    if beta.len() != c || xs.iter().any(|x| x.ncols() != c) {
        return Err(Error::DimensionMismatch(format!(
            "batch norm over {c} channels got mismatched inputs"
        )));
    }
    let (mean, var, batch_moments) = match mode {
        Mode::Train => {
            let n: usize = xs.iter().map(|x| x.nrows()).sum();
            if n == 0 {
                return Err(Error::Empty("batch norm input"));
            }
            let mut mean = Array1::<f64>::zeros(c);
            for x in xs {
                mean += &x.sum_axis(Axis(0));
            }
            mean /= n as f64;
            let mut var = Array1::<f64>::zeros(c);
            for x in xs {
                for row in x.rows() {
                    Zip::from(&mut var)
                        .and(&row)
                        .and(&mean)
                        .for_each(|v, &xv, &m| *v += (xv - m) * (xv - m));
                }
            }
            var /= n as f64;
            (mean.clone(), var.clone(), Some((mean, var)))
        }
        Mode::Infer => {
            let stats = running.ok_or(Error::NotTrained)?;
            (stats.mean.clone(), stats.var.clone(), None)
        }
    };
    let inv_std = var.mapv(|v| 1.0 / (v + BN_EPSILON).sqrt());
    let mut outs = Vec::with_capacity(xs.len());
    let mut xhats = Vec::with_capacity(xs.len());
    for x in xs {
        let xhat = (x - &mean) * &inv_std;
        outs.push(&xhat * &gamma + beta);
        xhats.push(xhat);
    }
    Ok((
        outs,
        BatchNormCache {
            xhat: xhats,
            inv_std,
            batch_stats: matches!(mode, Mode::Train),
            batch_moments,
        },
    ))
}

/// Input gradients per sequence; accumulates into `dgamma` and `dbeta`.
pub fn batchnorm_backward(
    cache: &BatchNormCache,
    gamma: ArrayView1<'_, f64>,
    dys: &[Array2<f64>],
    mut dgamma: ndarray::ArrayViewMut1<'_, f64>,
    mut dbeta: ndarray::ArrayViewMut1<'_, f64>,
) -> Vec<Array2<f64>> {
    let c = gamma.len();
    let mut sum_dy = Array1::<f64>::zeros(c);
    let mut sum_dy_xhat = Array1::<f64>::zeros(c);
    for (dy, xhat) in dys.iter().zip(&cache.xhat) {
        sum_dy += &dy.sum_axis(Axis(0));
        sum_dy_xhat += &(dy * xhat).sum_axis(Axis(0));
    }
    dgamma += &sum_dy_xhat;
    dbeta += &sum_dy;

    let scale = &gamma * &cache.inv_std;
    if !cache.batch_stats {
        return dys.iter().map(|dy| dy * &scale).collect();
    }
    let n: usize = dys.iter().map(|d| d.nrows()).sum();
    let n = n as f64;
    let mean_dy = &sum_dy / n;
    let mean_dy_xhat = &sum_dy_xhat / n;
    dys.iter()
        .zip(&cache.xhat)
        .map(|(dy, xhat)| (dy - &mean_dy - xhat * &mean_dy_xhat) * &scale)
        .collect()
}

/// `x` where positive, `slope * x` otherwise; one slope per channel.
pub fn prelu_forward(x: ArrayView2<'_, f64>, slope: ArrayView1<'_, f64>) -> Array2<f64> {
    let mut y = x.to_owned();
    for mut row in y.rows_mut() {
        Zip::from(&mut row)
            .and(&slope)
            .for_each(|v, &a| {
                if *v <= 0.0 {
                    *v *= a
                }
            });
    }
    y
}

/// Returns the input gradient; accumulates the slope gradient.
pub fn prelu_backward(
    x: ArrayView2<'_, f64>,
    slope: ArrayView1<'_, f64>,
    dy: ArrayView2<'_, f64>,
    mut dslope: ndarray::ArrayViewMut1<'_, f64>,
) -> Array2<f64> {
    let mut dx = dy.to_owned();
    for (mut drow, xrow) in dx.rows_mut().into_iter().zip(x.rows()) {
        Zip::from(&mut drow)
            .and(&xrow)
            .and(&slope)
            .and(&mut dslope)
            .for_each(|d, &xv, &a, ds| {
                if xv <= 0.0 {
                    *ds += *d * xv;
                    *d *= a;
                }
            });
    }
    dx
}
