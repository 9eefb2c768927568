use ndarray::{Array2, ArrayView2};

use super::{log_add_exp, PosteriorMatrix};
use crate::error::{Error, Result};

const NEG_INF: f64 = f64::NEG_INFINITY;

/// Fewest frames that can carry `target`: one per label plus one blank
/// between each pair of equal neighbours.
pub fn min_frames(target: &[usize]) -> usize {
    target.len() + target.windows(2).filter(|w| w[0] == w[1]).count()
}

/// Forward and backward variables over the blank-interleaved target.
///
/// `alpha[t][s]` is the log mass of path prefixes ending in extended state
/// `s` at frame `t`, emission at `t` included. `beta[t][s]` is the log mass
/// of the remaining suffix given state `s` at frame `t`, emission at `t`
/// excluded, so `alpha + beta` is the state occupancy.
struct Lattice {
    extended: Vec<usize>,
    alpha: Array2<f64>,
    beta: Array2<f64>,
    log_likelihood: f64,
}

fn check(log_probs: &ArrayView2<'_, f64>, target: &[usize], blank: usize) -> Result<()> {
    let v = log_probs.ncols();
    if blank >= v {
        return Err(Error::IdOutOfRange { id: blank, size: v });
    }
    for &l in target {
        if l == blank {
            return Err(Error::InvalidArgument("ctc target contains blank".into()));
        }
        if l >= v {
            return Err(Error::IdOutOfRange { id: l, size: v });
        }
    }
    let required = min_frames(target);
    if log_probs.nrows() < required || log_probs.nrows() == 0 {
        return Err(Error::Infeasible {
            frames: log_probs.nrows(),
            required: required.max(1),
        });
    }
    Ok(())
}

fn lattice(log_probs: ArrayView2<'_, f64>, target: &[usize], blank: usize) -> Result<Lattice> {
    check(&log_probs, target, blank)?;
    let t_len = log_probs.nrows();
    let mut extended = Vec::with_capacity(2 * target.len() + 1);
    extended.push(blank);
    for &l in target {
        extended.push(l);
        extended.push(blank);
    }
    let s_len = extended.len();
    // A state may be entered from two back when it is a label that differs
    // from the label two positions earlier.
    let skip: Vec<bool> = (0..s_len)
        .map(|s| s >= 2 && extended[s] != blank && extended[s] != extended[s - 2])
        .collect();

    let mut alpha = Array2::from_elem((t_len, s_len), NEG_INF);
    alpha[[0, 0]] = log_probs[[0, blank]];
    if s_len > 1 {
        alpha[[0, 1]] = log_probs[[0, extended[1]]];
    }
    for t in 1..t_len {
        for s in 0..s_len {
            let mut acc = alpha[[t - 1, s]];
            if s >= 1 {
                acc = log_add_exp(acc, alpha[[t - 1, s - 1]]);
            }
            if skip[s] {
                acc = log_add_exp(acc, alpha[[t - 1, s - 2]]);
            }
            alpha[[t, s]] = if acc == NEG_INF {
                NEG_INF
            } else {
                acc + log_probs[[t, extended[s]]]
            };
        }
    }

    let mut beta = Array2::from_elem((t_len, s_len), NEG_INF);
    beta[[t_len - 1, s_len - 1]] = 0.0;
    if s_len > 1 {
        beta[[t_len - 1, s_len - 2]] = 0.0;
    }
    for t in (0..t_len - 1).rev() {
        for s in 0..s_len {
            let step = |s2: usize| beta[[t + 1, s2]] + log_probs[[t + 1, extended[s2]]];
            let mut acc = step(s);
            if s + 1 < s_len {
                acc = log_add_exp(acc, step(s + 1));
            }
            if s + 2 < s_len && skip[s + 2] {
                acc = log_add_exp(acc, step(s + 2));
            }
            beta[[t, s]] = acc;
        }
    }

    let last = alpha[[t_len - 1, s_len - 1]];
    let log_likelihood = if s_len > 1 {
        log_add_exp(last, alpha[[t_len - 1, s_len - 2]])
    } else {
        last
    };
    Ok(Lattice {
        extended,
        alpha,
        beta,
        log_likelihood,
    })
}

/// Loss and gradient from log-probabilities `log_probs = log_softmax(logits)`.
///
/// The gradient is with respect to the logits: `softmax - gamma`, where
/// `gamma[t][k]` is the posterior mass of alignments emitting `k` at `t`.
pub fn ctc_loss_and_grad(
    log_probs: ArrayView2<'_, f64>,
    target: &[usize],
    blank: usize,
) -> Result<(f64, Array2<f64>)> {
    let lat = lattice(log_probs, target, blank)?;
    if lat.log_likelihood == NEG_INF {
        return Err(Error::NonFinite("ctc likelihood (every alignment has zero mass)"));
    }
    let mut grad = log_probs.mapv(f64::exp);
    for t in 0..log_probs.nrows() {
        for (s, &k) in lat.extended.iter().enumerate() {
            let occ = lat.alpha[[t, s]] + lat.beta[[t, s]];
            if occ > NEG_INF {
                grad[[t, k]] -= (occ - lat.log_likelihood).exp();
            }
        }
    }
    Ok((-lat.log_likelihood, grad))
}

/// `-ln p(target | posteriors)`, summing over every alignment that collapses
/// to `target`. Returns `+inf` when the target is feasible but every such
/// alignment has zero probability.
pub fn ctc_loss(posteriors: &PosteriorMatrix, target: &[usize], blank: usize) -> Result<f64> {
    let lp = posteriors.log_probs();
    Ok(-lattice(lp.view(), target, blank)?.log_likelihood)
}

/// Gradient of [`ctc_loss`] with respect to the pre-softmax logits.
pub fn ctc_grad(
    posteriors: &PosteriorMatrix,
    target: &[usize],
    blank: usize,
) -> Result<Array2<f64>> {
    let lp = posteriors.log_probs();
    Ok(ctc_loss_and_grad(lp.view(), target, blank)?.1)
}
