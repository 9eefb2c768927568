//! Finite-difference checks of every backward pass. Each routine returns
//! `(what, max relative error)` pairs.
#![allow(dead_code)]

use ndarray::{Array1, Array2, Array3, ArrayView2};
use npasr_core::ctc::{ctc_loss_and_grad, log_softmax_rows, min_frames};
use npasr_core::network::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{max_rel_err, numeric_grad};

pub type Report = Vec<(String, f64)>;

fn rand_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn a1(v: &[f64]) -> Array1<f64> {
    Array1::from(v.to_vec())
}

fn a2(v: &[f64], d: (usize, usize)) -> Array2<f64> {
    Array2::from_shape_vec(d, v.to_vec()).unwrap()
}

fn a3(v: &[f64], d: (usize, usize, usize)) -> Array3<f64> {
    Array3::from_shape_vec(d, v.to_vec()).unwrap()
}

fn flat<'a>(it: impl IntoIterator<Item = &'a f64>) -> Vec<f64> {
    it.into_iter().copied().collect()
}

fn dot(a: &Array2<f64>, r: &Array2<f64>) -> f64 {
    (a * r).sum()
}

/// A feasible random target of length <= `max_len` over labels `0..v-1`
/// (blank is `v - 1`).
pub fn random_target(rng: &mut ChaCha8Rng, t: usize, v: usize, max_len: usize) -> Vec<usize> {
    loop {
        let len = rng.random_range(0..=max_len);
        let y: Vec<usize> = (0..len).map(|_| rng.random_range(0..v - 1)).collect();
        if min_frames(&y) <= t {
            return y;
        }
    }
}

pub fn ctc(seed: u64, cases: usize) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let t = rng.random_range(1..=8);
        let v = rng.random_range(2..=5);
        let blank = v - 1;
        let y = random_target(&mut rng, t, v, 4);
        let z = rand_vec(&mut rng, t * v, 2.0);
        let loss = |z: &[f64]| {
            let lp = log_softmax_rows(a2(z, (t, v)).view());
            ctc_loss_and_grad(lp.view(), &y, blank).unwrap().0
        };
        let lp = log_softmax_rows(a2(&z, (t, v)).view());
        let (_, g) = ctc_loss_and_grad(lp.view(), &y, blank).unwrap();
        worst = worst.max(max_rel_err(&flat(&g), &numeric_grad(&z, loss)));
    }
    vec![("ctc logits".into(), worst)]
}

pub fn conv(seed: u64) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Report::new();
    for (t, k, stride) in [(8, 3, 1), (7, 3, 2), (5, 1, 1), (6, 2, 2), (2, 3, 1)] {
        let (cin, cout) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let x = rand_vec(&mut rng, t * cin, 1.0);
        let w = rand_vec(&mut rng, k * cin * cout, 1.0);
        let b = rand_vec(&mut rng, cout, 0.5);
        let t_out = conv_output_len(t, stride);
        let r = a2(&rand_vec(&mut rng, t_out * cout, 1.0), (t_out, cout));
        let f = |x: &[f64], w: &[f64], b: &[f64]| {
            let y = conv1d_forward(a2(x, (t, cin)).view(), a3(w, (k, cin, cout)).view(), a1(b).view(), stride)
                .unwrap();
            dot(&y, &r)
        };
        let (_, cache) =
            conv1d_forward_cached(a2(&x, (t, cin)).view(), a3(&w, (k, cin, cout)).view(), a1(&b).view(), stride)
                .unwrap();
        let mut dw = Array3::zeros((k, cin, cout));
        let mut db = Array1::zeros(cout);
        let dx = conv1d_backward(&cache, a3(&w, (k, cin, cout)).view(), stride, r.view(), dw.view_mut(), db.view_mut());
        let tag = format!("conv T={t} k={k} s={stride}");
        out.push((format!("{tag} input"), max_rel_err(&flat(&dx), &numeric_grad(&x, |x| f(x, &w, &b)))));
        out.push((format!("{tag} weights"), max_rel_err(&flat(&dw), &numeric_grad(&w, |w| f(&x, w, &b)))));
        out.push((format!("{tag} bias"), max_rel_err(&flat(&db), &numeric_grad(&b, |b| f(&x, &w, b)))));
    }
    out
}

pub fn batchnorm(seed: u64) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Report::new();
    let c = 3;
    let lens = [4usize, 3];
    let total: usize = lens.iter().sum();
    let x = rand_vec(&mut rng, total * c, 2.0);
    let gamma = rand_vec(&mut rng, c, 1.5);
    let beta = rand_vec(&mut rng, c, 0.5);
    let r = a2(&rand_vec(&mut rng, total * c, 1.0), (total, c));
    let running = RunningStats {
        mean: a1(&rand_vec(&mut rng, c, 0.5)),
        var: a1(&[0.7, 1.3, 2.0]),
    };
    for mode in [Mode::Train, Mode::Infer] {
        let split = |x: &[f64]| -> Vec<Array2<f64>> {
            let mut off = 0;
            lens.iter()
                .map(|&l| {
                    let s = a2(&x[off * c..(off + l) * c], (l, c));
                    off += l;
                    s
                })
                .collect()
        };
        let rs: Vec<Array2<f64>> = {
            let mut off = 0;
            lens.iter()
                .map(|&l| {
                    let s = r.slice(ndarray::s![off..off + l, ..]).to_owned();
                    off += l;
                    s
                })
                .collect()
        };
        let f = |x: &[f64], g: &[f64], b: &[f64]| {
            let xs = split(x);
            let views: Vec<ArrayView2<f64>> = xs.iter().map(|a| a.view()).collect();
            let (ys, _) = batchnorm_forward(&views, a1(g).view(), a1(b).view(), mode, Some(&running)).unwrap();
            ys.iter().zip(&rs).map(|(y, r)| dot(y, r)).sum::<f64>()
        };
        let xs = split(&x);
        let views: Vec<ArrayView2<f64>> = xs.iter().map(|a| a.view()).collect();
        let (_, cache) = batchnorm_forward(&views, a1(&gamma).view(), a1(&beta).view(), mode, Some(&running)).unwrap();
        let mut dg = Array1::zeros(c);
        let mut db = Array1::zeros(c);
        let dx = batchnorm_backward(&cache, a1(&gamma).view(), &rs, dg.view_mut(), db.view_mut());
        let dx: Vec<f64> = dx.iter().flat_map(|d| d.iter().copied()).collect();
        let tag = format!("batchnorm {mode:?}");
        out.push((format!("{tag} input"), max_rel_err(&dx, &numeric_grad(&x, |x| f(x, &gamma, &beta)))));
        out.push((format!("{tag} gamma"), max_rel_err(&flat(&dg), &numeric_grad(&gamma, |g| f(&x, g, &beta)))));
        out.push((format!("{tag} beta"), max_rel_err(&flat(&db), &numeric_grad(&beta, |b| f(&x, &gamma, b)))));
    }
    out
}

pub fn prelu(seed: u64) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (t, c) = (6, 4);
    // keep inputs away from the kink at 0
    let x: Vec<f64> = (0..t * c)
        .map(|_| {
            let m = rng.random_range(0.1..2.0);
            if rng.random_bool(0.5) { m } else { -m }
        })
        .collect();
    let a = rand_vec(&mut rng, c, 0.5);
    let r = a2(&rand_vec(&mut rng, t * c, 1.0), (t, c));
    let f = |x: &[f64], a: &[f64]| dot(&prelu_forward(a2(x, (t, c)).view(), a1(a).view()), &r);
    let mut da = Array1::zeros(c);
    let dx = prelu_backward(a2(&x, (t, c)).view(), a1(&a).view(), r.view(), da.view_mut());
    vec![
        ("prelu input".into(), max_rel_err(&flat(&dx), &numeric_grad(&x, |x| f(x, &a)))),
        ("prelu slope".into(), max_rel_err(&flat(&da), &numeric_grad(&a, |a| f(&x, a)))),
    ]
}

pub fn lstm(seed: u64) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (t, input, h) = (6, 3, 4);
    let x = rand_vec(&mut rng, t * input, 1.0);
    let wi = rand_vec(&mut rng, input * 4 * h, 0.8);
    let wh = rand_vec(&mut rng, h * 4 * h, 0.8);
    let b = rand_vec(&mut rng, 4 * h, 0.5);
    let r = a2(&rand_vec(&mut rng, t * h, 1.0), (t, h));
    let f = |x: &[f64], wi: &[f64], wh: &[f64], b: &[f64]| {
        let (wi, wh, b) = (a2(wi, (input, 4 * h)), a2(wh, (h, 4 * h)), a1(b));
        let w = LstmWeights { w_input: wi.view(), w_hidden: wh.view(), bias: b.view() };
        dot(&lstm_forward(a2(x, (t, input)).view(), &w).unwrap().0, &r)
    };
    let (wia, wha, ba) = (a2(&wi, (input, 4 * h)), a2(&wh, (h, 4 * h)), a1(&b));
    let w = LstmWeights { w_input: wia.view(), w_hidden: wha.view(), bias: ba.view() };
    let (_, cache) = lstm_forward(a2(&x, (t, input)).view(), &w).unwrap();
    let (mut gi, mut gh, mut gb) = (Array2::zeros((input, 4 * h)), Array2::zeros((h, 4 * h)), Array1::zeros(4 * h));
    let dx = {
        let mut g = LstmGrads { w_input: gi.view_mut(), w_hidden: gh.view_mut(), bias: gb.view_mut() };
        lstm_backward(&cache, &w, r.view(), &mut g)
    };
    vec![
        ("lstm input".into(), max_rel_err(&flat(&dx), &numeric_grad(&x, |x| f(x, &wi, &wh, &b)))),
        ("lstm w_input".into(), max_rel_err(&flat(&gi), &numeric_grad(&wi, |v| f(&x, v, &wh, &b)))),
        ("lstm w_hidden".into(), max_rel_err(&flat(&gh), &numeric_grad(&wh, |v| f(&x, &wi, v, &b)))),
        ("lstm bias".into(), max_rel_err(&flat(&gb), &numeric_grad(&b, |v| f(&x, &wi, &wh, v)))),
    ]
}

pub fn bilstm(seed: u64) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (t, input, h) = (5, 2, 3);
    let x = rand_vec(&mut rng, t * input, 1.0);
    // forward direction then backward direction, each [w_input | w_hidden | bias]
    let sizes = [input * 4 * h, h * 4 * h, 4 * h];
    let n: usize = sizes.iter().sum();
    let p = rand_vec(&mut rng, 2 * n, 0.8);
    let r = a2(&rand_vec(&mut rng, t * 2 * h, 1.0), (t, 2 * h));
    let unpack = |p: &[f64]| {
        let dir = |o: usize| {
            (
                a2(&p[o..o + sizes[0]], (input, 4 * h)),
                a2(&p[o + sizes[0]..o + sizes[0] + sizes[1]], (h, 4 * h)),
                a1(&p[o + sizes[0] + sizes[1]..o + n]),
            )
        };
        (dir(0), dir(n))
    };
    let mut out = Report::new();
    for (mode, rate) in [(Mode::Train, 0.25), (Mode::Infer, 0.25)] {
        let f = |x: &[f64], p: &[f64]| {
            let ((fi, fh, fb), (bi, bh, bb)) = unpack(p);
            let fw = LstmWeights { w_input: fi.view(), w_hidden: fh.view(), bias: fb.view() };
            let bw = LstmWeights { w_input: bi.view(), w_hidden: bh.view(), bias: bb.view() };
            let mut drng = ChaCha8Rng::seed_from_u64(99);
            let (y, _) = bilstm_forward(a2(x, (t, input)).view(), &fw, &bw, rate, mode, &mut drng).unwrap();
            dot(&y, &r)
        };
        let ((fi, fh, fb), (bi, bh, bb)) = unpack(&p);
        let fw = LstmWeights { w_input: fi.view(), w_hidden: fh.view(), bias: fb.view() };
        let bw = LstmWeights { w_input: bi.view(), w_hidden: bh.view(), bias: bb.view() };
        let mut drng = ChaCha8Rng::seed_from_u64(99);
        let (_, cache) = bilstm_forward(a2(&x, (t, input)).view(), &fw, &bw, rate, mode, &mut drng).unwrap();
        let zeros = || (Array2::zeros((input, 4 * h)), Array2::zeros((h, 4 * h)), Array1::zeros(4 * h));
        let (mut a, mut b, mut c) = zeros();
        let (mut d, mut e, mut g) = zeros();
        let dx = {
            let mut fg = LstmGrads { w_input: a.view_mut(), w_hidden: b.view_mut(), bias: c.view_mut() };
            let mut bg = LstmGrads { w_input: d.view_mut(), w_hidden: e.view_mut(), bias: g.view_mut() };
            bilstm_backward(&cache, &fw, &bw, r.view(), &mut fg, &mut bg)
        };
        let analytic: Vec<f64> = [flat(&a), flat(&b), flat(&c), flat(&d), flat(&e), flat(&g)].concat();
        out.push((format!("bilstm {mode:?} input"), max_rel_err(&flat(&dx), &numeric_grad(&x, |x| f(x, &p)))));
        out.push((format!("bilstm {mode:?} params"), max_rel_err(&analytic, &numeric_grad(&p, |p| f(&x, p)))));
    }
    out
}

pub fn dense(seed: u64) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (t, i, v) = (5, 4, 5);
    let x = rand_vec(&mut rng, t * i, 1.0);
    let w = rand_vec(&mut rng, i * v, 1.0);
    let b = rand_vec(&mut rng, v, 0.5);
    let r = a2(&rand_vec(&mut rng, t * v, 1.0), (t, v));
    let f = |x: &[f64], w: &[f64], b: &[f64]| {
        dot(&dense_forward(a2(x, (t, i)).view(), a2(w, (i, v)).view(), a1(b).view()).unwrap(), &r)
    };
    let mut dw = Array2::zeros((i, v));
    let mut db = Array1::zeros(v);
    let dx = dense_backward(a2(&x, (t, i)).view(), a2(&w, (i, v)).view(), r.view(), dw.view_mut(), db.view_mut());
    vec![
        ("dense input".into(), max_rel_err(&flat(&dx), &numeric_grad(&x, |x| f(x, &w, &b)))),
        ("dense weights".into(), max_rel_err(&flat(&dw), &numeric_grad(&w, |w| f(&x, w, &b)))),
        ("dense bias".into(), max_rel_err(&flat(&db), &numeric_grad(&b, |b| f(&x, &w, b)))),
    ]
}

type OwnedLayer = (Array3<f64>, Array1<f64>, Array1<f64>, Array1<f64>, Array1<f64>);

fn params_of(o: &[OwnedLayer]) -> Vec<ConvLayerParams<'_>> {
    o.iter()
        .map(|(w, b, g, be, s)| ConvLayerParams {
            conv_weight: w.view(),
            conv_bias: b.view(),
            gamma: g.view(),
            beta: be.view(),
            slope: s.view(),
            running: None,
        })
        .collect()
}

pub fn residual(seed: u64) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c, k, layers) = (3, 3, 2);
    let lens = [5usize, 4];
    let total: usize = lens.iter().sum();
    let x = rand_vec(&mut rng, total * c, 1.0);
    let per = k * c * c + 4 * c;
    let mut p = rand_vec(&mut rng, layers * per, 0.8);
    // gamma near 1, slope near 0.25
    for l in 0..layers {
        let o = l * per + k * c * c + c;
        for j in 0..c {
            p[o + j] += 1.0;
            p[o + 2 * c + j] = 0.25 + 0.1 * p[o + 2 * c + j];
        }
    }
    let r: Vec<Array2<f64>> = lens.iter().map(|&l| a2(&rand_vec(&mut rng, l * c, 1.0), (l, c))).collect();
    let owned = |p: &[f64]| -> Vec<OwnedLayer> {
        (0..layers)
            .map(|l| {
                let q = &p[l * per..(l + 1) * per];
                let w = k * c * c;
                (
                    a3(&q[..w], (k, c, c)),
                    a1(&q[w..w + c]),
                    a1(&q[w + c..w + 2 * c]),
                    a1(&q[w + 2 * c..w + 3 * c]),
                    a1(&q[w + 3 * c..w + 4 * c]),
                )
            })
            .collect()
    };
    let split = |x: &[f64]| -> Vec<Array2<f64>> {
        let mut off = 0;
        lens.iter()
            .map(|&l| {
                let s = a2(&x[off * c..(off + l) * c], (l, c));
                off += l;
                s
            })
            .collect()
    };
    let f = |x: &[f64], p: &[f64]| {
        let o = owned(p);
        let xs = split(x);
        let views: Vec<_> = xs.iter().map(|a| a.view()).collect();
        let (ys, _) = residual_block_forward(&views, &params_of(&o), Mode::Train).unwrap();
        ys.iter().zip(&r).map(|(y, r)| dot(y, r)).sum::<f64>()
    };
    let o = owned(&p);
    let params = params_of(&o);
    let xs = split(&x);
    let views: Vec<_> = xs.iter().map(|a| a.view()).collect();
    let (_, cache) = residual_block_forward(&views, &params, Mode::Train).unwrap();
    let mut grads: Vec<ConvLayerGrads> = params.iter().map(ConvLayerGrads::zeros_like).collect();
    let dx = residual_block_backward(&cache, &params, &r, &mut grads);
    let dx: Vec<f64> = dx.iter().flat_map(|d| d.iter().copied()).collect();
    let analytic: Vec<f64> = grads
        .iter()
        .flat_map(|g| [flat(&g.conv_weight), flat(&g.conv_bias), flat(&g.gamma), flat(&g.beta), flat(&g.slope)].concat())
        .collect();
    vec![
        ("residual block input".into(), max_rel_err(&dx, &numeric_grad(&x, |x| f(x, &p)))),
        ("residual block params".into(), max_rel_err(&analytic, &numeric_grad(&p, |p| f(&x, p)))),
    ]
}

pub fn tiny_config(stride: usize) -> NetworkConfig {
    NetworkConfig {
        input_dim: 4,
        conv_channels: 3,
        kernel_size: 3,
        stride,
        residual_blocks: 2,
        convs_per_block: 2,
        bilstm_layers: 2,
        hidden_size: 4,
        dropout_rate: 0.25,
        vocab_size: 5,
    }
}

/// End-to-end: CTC loss of a tiny model against every trainable parameter
/// and the input features, train mode with a fixed dropout mask.
pub fn model(seed: u64, stride: usize) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = tiny_config(stride);
    let t = 7;
    let blank = config.vocab_size - 1;
    let t_out = config.output_frames(t);
    let y = random_target(&mut rng, t_out, config.vocab_size, 3);
    let x = rand_vec(&mut rng, t * config.input_dim, 1.5);
    let mut model = AcousticModel::new(config.clone(), seed).unwrap();

    let loss_at = |model: &mut AcousticModel, x: &[f64]| -> (f64, Array2<f64>) {
        model.reseed_dropout(7);
        let xa = a2(x, (t, config.input_dim));
        let logits = model.forward_batch(&[xa.view()], Mode::Train).unwrap();
        let lp = log_softmax_rows(logits[0].view());
        ctc_loss_and_grad(lp.view(), &y, blank).unwrap()
    };

    let (_, g) = loss_at(&mut model, &x);
    model.params_mut().zero_grads();
    let dx = model.backward(&[g]).unwrap().remove(0);

    let mut out = Report::new();
    let numeric_x = numeric_grad(&x, |xp| loss_at(&mut model.clone(), xp).0);
    out.push((format!("model s={stride} input"), max_rel_err(&flat(&dx), &numeric_x)));

    let ids: Vec<ParamId> = model.params().ids().collect();
    for id in ids {
        let entry = model.params().entry(id).clone();
        if !entry.trainable {
            continue;
        }
        let analytic = model.params().grad(id).to_vec();
        let values = model.params().value(id).to_vec();
        let mut probe = model.clone();
        let numeric = numeric_grad(&values, |v| {
            probe.params_mut().value_mut(id).copy_from_slice(v);
            loss_at(&mut probe, &x).0
        });
        out.push((format!("model s={stride} {}", entry.name), max_rel_err(&analytic, &numeric)));
    }
    out
}

/// Every routine above.
pub fn all(seed: u64) -> Report {
    let mut r = ctc(seed, 40);
    r.extend(conv(seed + 1));
    r.extend(batchnorm(seed + 2));
    r.extend(prelu(seed + 3));
    r.extend(lstm(seed + 4));
    r.extend(bilstm(seed + 5));
    r.extend(dense(seed + 6));
    r.extend(residual(seed + 7));
    r.extend(model(seed + 8, 1));
    r.extend(model(seed + 9, 2));
    r
}
