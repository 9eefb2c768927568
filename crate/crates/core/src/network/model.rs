use ndarray::{Array1, Array2, Array3, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bilstm::{bilstm_backward, bilstm_forward, BiLstmCache};
use super::conv::{conv1d_backward, conv1d_forward_cached, ConvCache};
use super::dense::{dense_backward, dense_forward};
use super::lstm::{LstmGrads, LstmWeights};
use super::norm::RunningStats;
use super::params::{ParamId, ParameterStore, Values};
use super::residual::{
    residual_block_backward, residual_block_forward, ConvLayerGrads, ConvLayerParams,
    ResidualCache,
};
use super::{Mode, NetworkConfig};
use crate::ctc::PosteriorMatrix;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

const PRELU_INIT: f64 = 0.25;
const FORGET_BIAS_INIT: f64 = 1.0;

#[derive(Debug, Clone)]
struct AffineIds {
    weight: ParamId,
    bias: ParamId,
}

#[derive(Debug, Clone)]
struct BlockLayerIds {
    conv: AffineIds,
    gamma: ParamId,
    beta: ParamId,
    slope: ParamId,
    running_mean: ParamId,
    running_var: ParamId,
}

#[derive(Debug, Clone)]
struct LstmIds {
    w_input: ParamId,
    w_hidden: ParamId,
    bias: ParamId,
}

#[derive(Debug, Clone)]
struct Layout {
    input_conv: AffineIds,
    blocks: Vec<Vec<BlockLayerIds>>,
    /// `[forward, backward]` per layer.
    lstm: Vec<[LstmIds; 2]>,
    dense: AffineIds,
}

#[derive(Debug, Clone)]
struct ForwardCache {
    input_conv: Vec<ConvCache>,
    blocks: Vec<ResidualCache>,
    /// Indexed `[layer][example]`.
    lstm: Vec<Vec<BiLstmCache>>,
    dense_inputs: Vec<Array2<f64>>,
    logit_shapes: Vec<(usize, usize)>,
}

/// Parameters, optimizer state and the cache of the most recent forward pass.
#[derive(Debug, Clone)]
pub struct AcousticModel {
    config: NetworkConfig,
    store: ParameterStore,
    layout: Layout,
    dropout_rng: ChaCha8Rng,
    cache: Option<ForwardCache>,
}

fn uniform(rng: &mut ChaCha8Rng, len: usize, fan_in: usize) -> Vec<f64> {
    let limit = (3.0 / fan_in as f64).sqrt();
    (0..len).map(|_| rng.random_range(-limit..limit)).collect()
}

fn dropout_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

fn assert_finite(a: &Array2<f64>) {
    debug_assert!(a.iter().all(|v| v.is_finite()), "non-finite activation");
}

impl AcousticModel {
    /// Builds a model with fan-in scaled uniform weights drawn from `seed`.
    pub fn new(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParameterStore::new();
        let (n, k, h) = (config.conv_channels, config.kernel_size, config.hidden_size);

        let affine = |store: &mut ParameterStore,
                          rng: &mut ChaCha8Rng,
                          name: &str,
                          shape: &[usize],
                          fan_in: usize|
         -> Result<AffineIds> {
            let len = shape.iter().product();
            let out = *shape.last().expect("non-empty shape");
            Ok(AffineIds {
                weight: store.add(format!("{name}.weight"), shape, uniform(rng, len, fan_in), true)?,
                bias: store.add(format!("{name}.bias"), &[out], vec![0.0; out], true)?,
            })
        };

        let input_conv = affine(
            &mut store,
            &mut rng,
            "input_conv",
            &[k, config.input_dim, n],
            k * config.input_dim,
        )?;

        let mut blocks = Vec::with_capacity(config.residual_blocks);
        for b in 0..config.residual_blocks {
            let mut layers = Vec::with_capacity(config.convs_per_block);
            for l in 0..config.convs_per_block {
                let p = format!("block{b}.layer{l}");
                let conv = affine(&mut store, &mut rng, &format!("{p}.conv"), &[k, n, n], k * n)?;
                layers.push(BlockLayerIds {
                    conv,
                    gamma: store.add(format!("{p}.bn.gamma"), &[n], vec![1.0; n], true)?,
                    beta: store.add(format!("{p}.bn.beta"), &[n], vec![0.0; n], true)?,
                    slope: store.add(format!("{p}.prelu.slope"), &[n], vec![PRELU_INIT; n], true)?,
                    running_mean: store.add(format!("{p}.bn.running_mean"), &[n], vec![0.0; n], false)?,
                    running_var: store.add(format!("{p}.bn.running_var"), &[n], vec![1.0; n], false)?,
                });
            }
            blocks.push(layers);
        }

        let mut lstm = Vec::with_capacity(config.bilstm_layers);
        for l in 0..config.bilstm_layers {
            let input = if l == 0 { n } else { 2 * h };
            let mut dir = |name: &str| -> Result<LstmIds> {
                let p = format!("bilstm{l}.{name}");
                let mut bias = vec![0.0; 4 * h];
                bias[h..2 * h].fill(FORGET_BIAS_INIT);
                Ok(LstmIds {
                    w_input: store.add(
                        format!("{p}.w_input"),
                        &[input, 4 * h],
                        uniform(&mut rng, input * 4 * h, input),
                        true,
                    )?,
                    w_hidden: store.add(
                        format!("{p}.w_hidden"),
                        &[h, 4 * h],
                        uniform(&mut rng, h * 4 * h, h),
                        true,
                    )?,
                    bias: store.add(format!("{p}.bias"), &[4 * h], bias, true)?,
                })
            };
            let fwd = dir("fwd")?;
            let bwd = dir("bwd")?;
            lstm.push([fwd, bwd]);
        }

        let dense = affine(&mut store, &mut rng, "dense", &[2 * h, config.vocab_size], 2 * h)?;

        Ok(Self {
            config,
            store,
            layout: Layout {
                input_conv,
                blocks,
                lstm,
                dense,
            },
            dropout_rng: dropout_rng(seed),
            cache: None,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn params(&self) -> &ParameterStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParameterStore {
        &mut self.store
    }

    /// Restarts the dropout mask sequence.
    pub fn reseed_dropout(&mut self, seed: u64) {
        self.dropout_rng = dropout_rng(seed);
    }

    /// Drops the cached activations of the last forward pass.
    pub fn clear_cache(&mut self) {
        self.cache = None;
    }

    /// Runs a batch of `T_i x input_dim` sequences and caches what
    /// [`AcousticModel::backward`] needs. Returns per-sequence logits.
    ///
    /// Sequences are processed at their true lengths, so padding never
    /// reaches the network. In train mode the batch-norm statistics span
    /// every frame of the batch and the running statistics are updated.
    pub fn forward_batch(
        &mut self,
        xs: &[ArrayView2<'_, f64>],
        mode: Mode,
    ) -> Result<Vec<Array2<f64>>> {
        self.cache = None;
        let (logits, cache) = run(
            &self.config,
            &self.layout,
            self.store.values_view(),
            xs,
            mode,
            &mut self.dropout_rng,
        )?;
        if mode == Mode::Train {
            for (block_ids, block_cache) in self.layout.blocks.iter().zip(&cache.blocks) {
                for (ids, layer) in block_ids.iter().zip(&block_cache.layers) {
                    let (mean, var) = layer.batch_moments().expect("train-mode moments");
                    let mut stats = RunningStats {
                        mean: Array1::from(self.store.value(ids.running_mean).to_vec()),
                        var: Array1::from(self.store.value(ids.running_var).to_vec()),
                    };
                    stats.update(mean, var);
                    self.store
                        .value_mut(ids.running_mean)
                        .copy_from_slice(stats.mean.as_slice().expect("contiguous"));
                    self.store
                        .value_mut(ids.running_var)
                        .copy_from_slice(stats.var.as_slice().expect("contiguous"));
                }
            }
        }
        self.cache = Some(cache);
        Ok(logits)
    }

    /// Posteriors for one utterance, caching for a backward pass.
    pub fn forward(&mut self, features: &FeatureMatrix, mode: Mode) -> Result<PosteriorMatrix> {
        let logits = self.forward_batch(&[features.view()], mode)?;
        Ok(PosteriorMatrix::from_logits(logits[0].view()))
    }

    /// Inference-mode logits without touching the cache; safe to call from
    /// many threads on a shared model.
    pub fn logits(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut unused = dropout_rng(0);
        let (mut logits, _) = run(
            &self.config,
            &self.layout,
            self.store.values_view(),
            &[x],
            Mode::Infer,
            &mut unused,
        )?;
        Ok(logits.remove(0))
    }

    pub fn predict(&self, features: &FeatureMatrix) -> Result<PosteriorMatrix> {
        Ok(PosteriorMatrix::from_logits(self.logits(features.view())?.view()))
    }

    /// Backpropagates `dlogits` (one per sequence of the last forward pass)
    /// and adds the parameter gradients into the store. Returns the input
    /// gradients. Consumes the cache.
    pub fn backward(&mut self, dlogits: &[Array2<f64>]) -> Result<Vec<Array2<f64>>> {
        let cache = self.cache.take().ok_or(Error::NoForwardCache)?;
        if dlogits.len() != cache.logit_shapes.len()
            || dlogits.iter().zip(&cache.logit_shapes).any(|(d, s)| d.dim() != *s)
        {
            return Err(Error::DimensionMismatch(
                "upstream gradients do not match the cached forward pass".into(),
            ));
        }
        let (dx, grads) = backprop(&self.config, &self.layout, self.store.values_view(), &cache, dlogits);
        for (id, g) in grads {
            for (acc, v) in self.store.grad_mut(id).iter_mut().zip(g) {
                *acc += v;
            }
        }
        Ok(dx)
    }
}

fn block_params<'a>(values: Values<'a>, ids: &[BlockLayerIds], mode: Mode) -> Vec<ConvLayerParams<'a>> {
    ids.iter()
        .map(|l| ConvLayerParams {
            conv_weight: values.view3(l.conv.weight),
            conv_bias: values.view1(l.conv.bias),
            gamma: values.view1(l.gamma),
            beta: values.view1(l.beta),
            slope: values.view1(l.slope),
            running: (mode == Mode::Infer).then(|| RunningStats {
                mean: values.view1(l.running_mean).to_owned(),
                var: values.view1(l.running_var).to_owned(),
            }),
        })
        .collect()
}

fn lstm_weights<'a>(values: Values<'a>, ids: &LstmIds) -> LstmWeights<'a> {
    LstmWeights {
        w_input: values.view2(ids.w_input),
        w_hidden: values.view2(ids.w_hidden),
        bias: values.view1(ids.bias),
    }
}

fn run(
    config: &NetworkConfig,
    layout: &Layout,
    values: Values<'_>,
    xs: &[ArrayView2<'_, f64>],
    mode: Mode,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Array2<f64>>, ForwardCache)> {
    if xs.is_empty() {
        return Err(Error::Empty("forward batch"));
    }
    for x in xs {
        if x.ncols() != config.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "features have {} columns, model expects {}",
                x.ncols(),
                config.input_dim
            )));
        }
        if x.nrows() == 0 {
            return Err(Error::Empty("feature matrix"));
        }
    }

    let mut input_conv = Vec::with_capacity(xs.len());
    let mut hs = Vec::with_capacity(xs.len());
    for x in xs {
        let (y, c) = conv1d_forward_cached(
            *x,
            values.view3(layout.input_conv.weight),
            values.view1(layout.input_conv.bias),
            config.stride,
        )?;
        assert_finite(&y);
        hs.push(y);
        input_conv.push(c);
    }

    let mut blocks = Vec::with_capacity(layout.blocks.len());
    for ids in &layout.blocks {
        let params = block_params(values, ids, mode);
        let views: Vec<_> = hs.iter().map(|a| a.view()).collect();
        let (next, cache) = residual_block_forward(&views, &params, mode)?;
        next.iter().for_each(assert_finite);
        hs = next;
        blocks.push(cache);
    }

    let mut lstm = Vec::with_capacity(layout.lstm.len());
    for [f, b] in &layout.lstm {
        let (fw, bw) = (lstm_weights(values, f), lstm_weights(values, b));
        let mut caches = Vec::with_capacity(hs.len());
        let mut next = Vec::with_capacity(hs.len());
        for h in &hs {
            let (y, c) = bilstm_forward(h.view(), &fw, &bw, config.dropout_rate, mode, rng)?;
            assert_finite(&y);
            next.push(y);
            caches.push(c);
        }
        hs = next;
        lstm.push(caches);
    }

    let mut logits = Vec::with_capacity(hs.len());
    for h in &hs {
        let y = dense_forward(
            h.view(),
            values.view2(layout.dense.weight),
            values.view1(layout.dense.bias),
        )?;
        assert_finite(&y);
        logits.push(y);
    }
    let logit_shapes = logits.iter().map(Array2::dim).collect();
    Ok((
        logits,
        ForwardCache {
            input_conv,
            blocks,
            lstm,
            dense_inputs: hs,
            logit_shapes,
        },
    ))
}

type ParamGrads = Vec<(ParamId, Vec<f64>)>;

fn backprop(
    config: &NetworkConfig,
    layout: &Layout,
    values: Values<'_>,
    cache: &ForwardCache,
    dlogits: &[Array2<f64>],
) -> (Vec<Array2<f64>>, ParamGrads) {
    let mut out: ParamGrads = Vec::new();
    let push1 = |out: &mut ParamGrads, id, a: Array1<f64>| out.push((id, a.into_raw_vec_and_offset().0));
    let push2 = |out: &mut ParamGrads, id, a: Array2<f64>| out.push((id, a.into_raw_vec_and_offset().0));
    let push3 = |out: &mut ParamGrads, id, a: Array3<f64>| out.push((id, a.into_raw_vec_and_offset().0));

    let w = values.view2(layout.dense.weight);
    let mut dw = Array2::zeros(w.dim());
    let mut db = Array1::zeros(w.ncols());
    let mut d: Vec<Array2<f64>> = cache
        .dense_inputs
        .iter()
        .zip(dlogits)
        .map(|(x, dy)| dense_backward(x.view(), w, dy.view(), dw.view_mut(), db.view_mut()))
        .collect();
    push2(&mut out, layout.dense.weight, dw);
    push1(&mut out, layout.dense.bias, db);

    for ([f, b], caches) in layout.lstm.iter().zip(&cache.lstm).rev() {
        let (fw, bw) = (lstm_weights(values, f), lstm_weights(values, b));
        let zeros = |l: &LstmWeights<'_>| {
            (
                Array2::<f64>::zeros(l.w_input.dim()),
                Array2::<f64>::zeros(l.w_hidden.dim()),
                Array1::<f64>::zeros(l.bias.len()),
            )
        };
        let (mut fi, mut fh, mut fb) = zeros(&fw);
        let (mut bi, mut bh, mut bb) = zeros(&bw);
        {
            let mut fg = LstmGrads {
                w_input: fi.view_mut(),
                w_hidden: fh.view_mut(),
                bias: fb.view_mut(),
            };
            let mut bg = LstmGrads {
                w_input: bi.view_mut(),
                w_hidden: bh.view_mut(),
                bias: bb.view_mut(),
            };
            d = caches
                .iter()
                .zip(&d)
                .map(|(c, dy)| bilstm_backward(c, &fw, &bw, dy.view(), &mut fg, &mut bg))
                .collect();
        }
        push2(&mut out, f.w_input, fi);
        push2(&mut out, f.w_hidden, fh);
        push1(&mut out, f.bias, fb);
        push2(&mut out, b.w_input, bi);
        push2(&mut out, b.w_hidden, bh);
        push1(&mut out, b.bias, bb);
    }

    for (ids, block_cache) in layout.blocks.iter().zip(&cache.blocks).rev() {
        let mode = if block_cache.layers.first().is_some_and(|l| l.batch_moments().is_some()) {
            Mode::Train
        } else {
            Mode::Infer
        };
        let params = block_params(values, ids, mode);
        let mut grads: Vec<ConvLayerGrads> = params.iter().map(ConvLayerGrads::zeros_like).collect();
        d = residual_block_backward(block_cache, &params, &d, &mut grads);
        for (l, g) in ids.iter().zip(grads) {
            push3(&mut out, l.conv.weight, g.conv_weight);
            push1(&mut out, l.conv.bias, g.conv_bias);
            push1(&mut out, l.gamma, g.gamma);
            push1(&mut out, l.beta, g.beta);
            push1(&mut out, l.slope, g.slope);
        }
    }

    let w = values.view3(layout.input_conv.weight);
    let mut dw = Array3::zeros(w.dim());
    let mut db = Array1::zeros(w.dim().2);
    let dx = cache
        .input_conv
        .iter()
        .zip(&d)
        .map(|(c, dy)| conv1d_backward(c, w, config.stride, dy.view(), dw.view_mut(), db.view_mut()))
        .collect();
    push3(&mut out, layout.input_conv.weight, dw);
    push1(&mut out, layout.input_conv.bias, db);
    (dx, out)
}
