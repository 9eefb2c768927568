//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

pub mod gradcheck;
pub mod overfit;

use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng;

/// Collapse a path: merge repeats, drop blanks.
pub fn collapse_path(path: &[usize], blank: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = usize::MAX;
    for &k in path {
        if k != prev && k != blank {
            out.push(k);
        }
        prev = k;
    }
    out
}

/// Calls `visit` with every length-`t` path over `v` symbols.
pub fn for_each_path(t: usize, v: usize, mut visit: impl FnMut(&[usize])) {
    let mut path = vec![0usize; t];
    loop {
        visit(&path);
        let mut i = 0;
        loop {
            if i == t {
                return;
            }
            path[i] += 1;
            if path[i] < v {
                break;
            }
            path[i] = 0;
            i += 1;
        }
    }
}

/// Probability of `target` by summing every path that collapses to it.
pub fn brute_force_ctc(probs: &Array2<f64>, target: &[usize], blank: usize) -> f64 {
    let (t, v) = probs.dim();
    let mut total = 0.0;
    for_each_path(t, v, |path| {
        if collapse_path(path, blank) == target {
            total += path.iter().enumerate().map(|(i, &k)| probs[[i, k]]).product::<f64>();
        }
    });
    total
}

/// Exact probability of every labeling, by path enumeration.
pub fn labeling_masses(probs: &Array2<f64>, blank: usize) -> Vec<(Vec<usize>, f64)> {
    let (t, v) = probs.dim();
    let mut masses: std::collections::BTreeMap<Vec<usize>, f64> = Default::default();
    for_each_path(t, v, |path| {
        let p: f64 = path.iter().enumerate().map(|(i, &k)| probs[[i, k]]).product();
        *masses.entry(collapse_path(path, blank)).or_default() += p;
    });
    masses.into_iter().collect()
}

/// Random row-stochastic matrix with entries bounded away from 0.
pub fn random_posteriors(rng: &mut impl Rng, t: usize, v: usize) -> Array2<f64> {
    let mut a = Array2::from_shape_fn((t, v), |_| rng.random_range(0.05..1.0));
    for mut row in a.rows_mut() {
        let s = row.sum();
        row /= s;
    }
    a
}

/// `|sum_n x[n] e^{-2 pi i k n / N}|^2 / N` for `k = 0..=N/2`.
pub fn naive_power_spectrum(frame: &[f64], n: usize) -> Vec<f64> {
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, &x) in frame.iter().enumerate() {
                let ang = -2.0 * PI * (k * i) as f64 / n as f64;
                re += x * ang.cos();
                im += x * ang.sin();
            }
            (re * re + im * im) / n as f64
        })
        .collect()
}

/// Orthonormal DCT-II by direct summation, first `n_out` coefficients.
pub fn naive_dct(x: &[f64], n_out: usize) -> Vec<f64> {
    let n = x.len() as f64;
    (0..n_out)
        .map(|k| {
            let s: f64 = x
                .iter()
                .enumerate()
                .map(|(i, &v)| v * (PI / n * (i as f64 + 0.5) * k as f64).cos())
                .sum();
            let w = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            w * s
        })
        .collect()
}

/// Full-table Levenshtein distance over chars.
pub fn dp_edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

pub const FD_STEP: f64 = 1e-4;

/// Central differences of `f` at `x`.
pub fn numeric_grad(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + FD_STEP;
            let up = f(&p);
            p[i] = orig - FD_STEP;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Below this magnitude both gradients count as zero; the relative error
/// is taken against this floor instead.
pub const REL_FLOOR: f64 = 1e-6;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| rel_err(a, n))
        .fold(0.0, f64::max)
}
