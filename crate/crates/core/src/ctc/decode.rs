use std::cmp::Ordering;
use std::collections::HashMap;

use ndarray::Axis;

use super::{collapse, log_add_exp, PosteriorMatrix};
use crate::error::{Error, Result};
use crate::textcodec::{decode_ids, Vocabulary};

const NEG_INF: f64 = f64::NEG_INFINITY;

/// A labeling prefix with its alignment mass split by the final symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamHypothesis {
    pub prefix: Vec<usize>,
    /// Log mass of alignments of `prefix` ending in blank.
    pub log_p_blank: f64,
    /// Log mass of alignments of `prefix` ending in its last label.
    pub log_p_nonblank: f64,
}

impl BeamHypothesis {
    pub fn log_total(&self) -> f64 {
        log_add_exp(self.log_p_blank, self.log_p_nonblank)
    }
}

/// Higher mass first, then shorter prefix, then lexicographically smaller ids.
fn rank(a_prefix: &[usize], a_mass: f64, b_prefix: &[usize], b_mass: f64) -> Ordering {
    b_mass
        .total_cmp(&a_mass)
        .then(a_prefix.len().cmp(&b_prefix.len()))
        .then_with(|| a_prefix.cmp(b_prefix))
}

/// Per-frame argmax (lowest id on ties), collapsed.
pub fn greedy_labels(posteriors: &PosteriorMatrix, blank: usize) -> Vec<usize> {
    let path: Vec<usize> = posteriors
        .probs()
        .axis_iter(Axis(0))
        .map(|row| {
            let mut best = 0;
            for (k, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect();
    collapse(&path, blank)
}

pub fn greedy_decode(posteriors: &PosteriorMatrix, vocab: &Vocabulary) -> Result<String> {
    decode_ids(&greedy_labels(posteriors, vocab.blank_id()), vocab)
}

/// Prefix beam search. Returns the surviving hypotheses best first.
///
/// Alignment mass is merged per labeling prefix, so with an unbounded width
/// the returned masses are exact labeling probabilities.
pub fn beam_search(
    posteriors: &PosteriorMatrix,
    blank: usize,
    beam_width: usize,
) -> Result<Vec<BeamHypothesis>> {
    if beam_width == 0 {
        return Err(Error::InvalidArgument("beam width must be >= 1".into()));
    }
    let v = posteriors.vocab_size();
    if blank >= v {
        return Err(Error::IdOutOfRange { id: blank, size: v });
    }
    let log_probs = posteriors.log_probs();

    let mut beam: Vec<BeamHypothesis> = vec![BeamHypothesis {
        prefix: Vec::new(),
        log_p_blank: 0.0,
        log_p_nonblank: NEG_INF,
    }];

    for row in log_probs.axis_iter(Axis(0)) {
        let mut next: HashMap<Vec<usize>, (f64, f64)> = HashMap::with_capacity(beam.len() * 2);
        for hyp in &beam {
            let total = hyp.log_total();
            let last = hyp.prefix.last().copied();

            let lp_blank = row[blank];
            if lp_blank > NEG_INF {
                let slot = next.entry(hyp.prefix.clone()).or_insert((NEG_INF, NEG_INF));
                slot.0 = log_add_exp(slot.0, total + lp_blank);
            }

            for (k, &lp) in row.iter().enumerate() {
                if k == blank || lp == NEG_INF {
                    continue;
                }
                let mut extended = hyp.prefix.clone();
                extended.push(k);
                if last == Some(k) {
                    // Repeating the last label without a blank stays on the
                    // same prefix; after a blank it starts a new label.
                    let same = next.entry(hyp.prefix.clone()).or_insert((NEG_INF, NEG_INF));
                    same.1 = log_add_exp(same.1, hyp.log_p_nonblank + lp);
                    let ext = next.entry(extended).or_insert((NEG_INF, NEG_INF));
                    ext.1 = log_add_exp(ext.1, hyp.log_p_blank + lp);
                } else {
                    let ext = next.entry(extended).or_insert((NEG_INF, NEG_INF));
                    ext.1 = log_add_exp(ext.1, total + lp);
                }
            }
        }

        let mut ranked: Vec<(Vec<usize>, f64, f64, f64)> = next
            .into_iter()
            .map(|(prefix, (b, nb))| {
                let total = log_add_exp(b, nb);
                (prefix, total, b, nb)
            })
            .filter(|h| h.1 > NEG_INF)
            .collect();
        let order = |a: &(Vec<usize>, f64, f64, f64), b: &(Vec<usize>, f64, f64, f64)| rank(&a.0, a.1, &b.0, b.1);
        if ranked.len() > beam_width {
            ranked.select_nth_unstable_by(beam_width - 1, order);
            ranked.truncate(beam_width);
        }
        ranked.sort_by(order);
        beam = ranked
            .into_iter()
            .map(|(prefix, _, b, nb)| BeamHypothesis {
                prefix,
                log_p_blank: b,
                log_p_nonblank: nb,
            })
            .collect();
        if beam.is_empty() {
            return Err(Error::NonFinite("beam search (every extension has zero mass)"));
        }
    }
    Ok(beam)
}

/// Label ids of the best labeling found by [`beam_search`].
pub fn beam_search_labels(
    posteriors: &PosteriorMatrix,
    blank: usize,
    beam_width: usize,
) -> Result<Vec<usize>> {
    let beam = beam_search(posteriors, blank, beam_width)?;
    Ok(beam.into_iter().next().map(|h| h.prefix).unwrap_or_default())
}

pub fn beam_search_decode(
    posteriors: &PosteriorMatrix,
    vocab: &Vocabulary,
    beam_width: usize,
) -> Result<String> {
    let labels = beam_search_labels(posteriors, vocab.blank_id(), beam_width)?;
    decode_ids(&labels, vocab)
}
