//! LSTM recurrence and its backpropagation through time.
//!
//! Gate pre-activations are laid out `[input | forget | cell | output]`, each
//! `hidden` wide, in one `4 * hidden` vector.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};

use crate::error::{Error, Result};

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Weights of one direction.
#[derive(Debug, Clone, Copy)]
pub struct LstmWeights<'a> {
    /// `input_dim x 4H`
    pub w_input: ArrayView2<'a, f64>,
    /// `H x 4H`
    pub w_hidden: ArrayView2<'a, f64>,
    /// `4H`
    pub bias: ArrayView1<'a, f64>,
}

impl LstmWeights<'_> {
    pub fn hidden_size(&self) -> usize {
        self.w_hidden.nrows()
    }

    fn check(&self, input_dim: usize) -> Result<()> {
        let h = self.hidden_size();
        if self.w_hidden.ncols() != 4 * h
            || self.w_input.ncols() != 4 * h
            || self.bias.len() != 4 * h
            || self.w_input.nrows() != input_dim
        {
            return Err(Error::DimensionMismatch(format!(
                "lstm weights (input {:?}, hidden {:?}, bias {}) for input dim {input_dim}",
                self.w_input.dim(),
                self.w_hidden.dim(),
                self.bias.len()
            )));
        }
        Ok(())
    }
}

/// Activated gates for one step, written in place over the pre-activations.
fn activate(z: &mut ArrayViewMut1<'_, f64>, h: usize) {
    for (k, v) in z.iter_mut().enumerate() {
        *v = if (2 * h..3 * h).contains(&k) {
            v.tanh()
        } else {
            sigmoid(*v)
        };
    }
}

/// One recurrence step: `(h_t, c_t)` from `x_t` and the previous state.
pub fn lstm_step(
    x_t: ArrayView1<'_, f64>,
    h_prev: ArrayView1<'_, f64>,
    c_prev: ArrayView1<'_, f64>,
    weights: &LstmWeights<'_>,
) -> Result<(Array1<f64>, Array1<f64>)> {
    weights.check(x_t.len())?;
    let h = weights.hidden_size();
    if h_prev.len() != h || c_prev.len() != h {
        return Err(Error::DimensionMismatch(format!(
            "lstm state sizes ({}, {}) for hidden size {h}",
            h_prev.len(),
            c_prev.len()
        )));
    }
    let mut z = x_t.dot(&weights.w_input) + h_prev.dot(&weights.w_hidden) + weights.bias;
    activate(&mut z.view_mut(), h);
    let (i, f, g, o) = (
        z.slice(s![0..h]),
        z.slice(s![h..2 * h]),
        z.slice(s![2 * h..3 * h]),
        z.slice(s![3 * h..4 * h]),
    );
    let c = &f * &c_prev + &i * &g;
    let h_t = &o * &c.mapv(f64::tanh);
    Ok((h_t, c))
}

/// Per-sequence state kept for backpropagation.
#[derive(Debug, Clone)]
pub struct LstmCache {
    input: Array2<f64>,
    /// Activated gates, `T x 4H`.
    gates: Array2<f64>,
    cells: Array2<f64>,
    tanh_cells: Array2<f64>,
    hidden: Array2<f64>,
}

/// Runs the recurrence left to right from zero state. Returns `T x H`.
pub fn lstm_forward(
    x: ArrayView2<'_, f64>,
    weights: &LstmWeights<'_>,
) -> Result<(Array2<f64>, LstmCache)> {
    weights.check(x.ncols())?;
    let h = weights.hidden_size();
    let t_len = x.nrows();
    let mut gates = x.dot(&weights.w_input);
    gates += &weights.bias;
    let mut cells = Array2::zeros((t_len, h));
    let mut tanh_cells = Array2::zeros((t_len, h));
    let mut hidden = Array2::zeros((t_len, h));
    let mut h_prev = Array1::zeros(h);
    let mut c_prev = Array1::zeros(h);
    for t in 0..t_len {
        let mut z = gates.row_mut(t);
        z += &h_prev.dot(&weights.w_hidden);
        activate(&mut z, h);
        let z = gates.row(t);
        let c = &z.slice(s![h..2 * h]) * &c_prev + &z.slice(s![0..h]) * &z.slice(s![2 * h..3 * h]);
        let tc = c.mapv(f64::tanh);
        let h_t = &z.slice(s![3 * h..4 * h]) * &tc;
        cells.row_mut(t).assign(&c);
        tanh_cells.row_mut(t).assign(&tc);
        hidden.row_mut(t).assign(&h_t);
        h_prev = h_t;
        c_prev = c;
    }
    let out = hidden.clone();
    Ok((
        out,
        LstmCache {
            input: x.to_owned(),
            gates,
            cells,
            tanh_cells,
            hidden,
        },
    ))
}

/// Gradient accumulators of one direction.
pub struct LstmGrads<'a> {
    pub w_input: ArrayViewMut2<'a, f64>,
    pub w_hidden: ArrayViewMut2<'a, f64>,
    pub bias: ArrayViewMut1<'a, f64>,
}

/// Backpropagation through time. `dh` is the gradient on every output
/// `h_t`; returns the input gradient `T x input_dim`.
pub fn lstm_backward(
    cache: &LstmCache,
    weights: &LstmWeights<'_>,
    dh: ArrayView2<'_, f64>,
    grads: &mut LstmGrads<'_>,
) -> Array2<f64> {
    let h = weights.hidden_size();
    let t_len = dh.nrows();
    let mut dz_all = Array2::zeros((t_len, 4 * h));
    let mut dh_next = Array1::<f64>::zeros(h);
    let mut dc_next = Array1::<f64>::zeros(h);
    for t in (0..t_len).rev() {
        let z = cache.gates.row(t);
        let (i, f, g, o) = (
            z.slice(s![0..h]),
            z.slice(s![h..2 * h]),
            z.slice(s![2 * h..3 * h]),
            z.slice(s![3 * h..4 * h]),
        );
        let tc = cache.tanh_cells.row(t);
        let dh_t = &dh.row(t) + &dh_next;
        let dc = &dh_t * &o * &tc.mapv(|v| 1.0 - v * v) + &dc_next;
        let c_prev = if t > 0 {
            cache.cells.row(t - 1).to_owned()
        } else {
            Array1::zeros(h)
        };
        let mut dz = dz_all.row_mut(t);
        ndarray::Zip::from(dz.slice_mut(s![0..h]))
            .and(&dc)
            .and(&g)
            .and(&i)
            .for_each(|d, &dc, &g, &i| *d = dc * g * i * (1.0 - i));
        ndarray::Zip::from(dz.slice_mut(s![h..2 * h]))
            .and(&dc)
            .and(&c_prev)
            .and(&f)
            .for_each(|d, &dc, &cp, &f| *d = dc * cp * f * (1.0 - f));
        ndarray::Zip::from(dz.slice_mut(s![2 * h..3 * h]))
            .and(&dc)
            .and(&i)
            .and(&g)
            .for_each(|d, &dc, &i, &g| *d = dc * i * (1.0 - g * g));
        ndarray::Zip::from(dz.slice_mut(s![3 * h..4 * h]))
            .and(&dh_t)
            .and(&tc)
            .and(&o)
            .for_each(|d, &dh, &tc, &o| *d = dh * tc * o * (1.0 - o));
        let dz = dz_all.row(t);
        dh_next = weights.w_hidden.dot(&dz);
        dc_next = &dc * &f;
    }
    // Hidden-weight gradient: sum_t h_{t-1}^T dz_t, with h_{-1} = 0.
    if t_len > 1 {
        let h_prev = cache.hidden.slice(s![0..t_len - 1, ..]);
        let dz_rest = dz_all.slice(s![1..t_len, ..]);
        ndarray::linalg::general_mat_mul(1.0, &h_prev.t(), &dz_rest, 1.0, &mut grads.w_hidden);
    }
    ndarray::linalg::general_mat_mul(1.0, &cache.input.t(), &dz_all, 1.0, &mut grads.w_input);
    grads.bias += &dz_all.sum_axis(Axis(0));
    dz_all.dot(&weights.w_input.t())
}

/// Reverses the row order.
pub fn reverse_time(x: ArrayView2<'_, f64>) -> Array2<f64> {
    x.slice(s![..;-1, ..]).to_owned()
}
