//! Tokenization-free character-level text encoder.
//!
//! Domain names are consumed as raw UTF-8 bytes (257-slot vocabulary: 256
//! byte values plus PAD), embedded, combined with fixed sinusoidal
//! positions, passed through pre-norm transformer encoder layers, and
//! mean-pooled over the real positions into a fixed-width text embedding.
//! Examples are processed independently, so batch composition can never
//! leak across rows.

use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{glorot_uniform, zeros1};
use crate::domain::DomainName;
use crate::error::{Error, Result};

/// 256 byte values + PAD.
pub const VOCAB_SIZE: usize = 257;
pub const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub embed_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub ffn_dim: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            embed_dim: 32,
            num_layers: 1,
            num_heads: 2,
            ffn_dim: 64,
            max_len: 64,
            seed: 0,
        }
    }
}

impl EncoderConfig {
    fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.num_layers == 0 || self.num_heads == 0 || self.ffn_dim == 0 {
            return Err(Error::InvalidConfig(
                "encoder dims and layer counts must be positive".into(),
            ));
        }
        if !self.embed_dim.is_multiple_of(self.num_heads) {
            return Err(Error::InvalidConfig(format!(
                "embed_dim {} not divisible by num_heads {}",
                self.embed_dim, self.num_heads
            )));
        }
        if self.max_len == 0 {
            return Err(Error::InvalidConfig("max_len must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LayerNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

impl LayerNorm {
    fn new(dim: usize) -> Self {
        LayerNorm {
            gamma: Array1::ones(dim),
            beta: zeros1(dim),
        }
    }

    /// Row-wise layer norm. Returns (y, xhat, per-row invstd).
    fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
        let d = x.ncols() as f64;
        let mean = x.mean_axis(Axis(1)).unwrap();
        let mut xhat = x.clone();
        for (mut row, &m) in xhat.rows_mut().into_iter().zip(mean.iter()) {
            row.mapv_inplace(|v| v - m);
        }
        let var = xhat.mapv(|v| v * v).sum_axis(Axis(1)) / d;
        let invstd = var.mapv(|v| 1.0 / (v + LN_EPS).sqrt());
        for (mut row, &s) in xhat.rows_mut().into_iter().zip(invstd.iter()) {
            row.mapv_inplace(|v| v * s);
        }
        let y = &xhat * &self.gamma + &self.beta;
        (y, xhat, invstd)
    }

    /// Backward through row-wise layer norm. Accumulates parameter grads
    /// into (dgamma, dbeta) and returns dx.
    fn backward(
        &self,
        dy: &Array2<f64>,
        xhat: &Array2<f64>,
        invstd: &Array1<f64>,
        dgamma: &mut Array1<f64>,
        dbeta: &mut Array1<f64>,
    ) -> Array2<f64> {
        let d = dy.ncols() as f64;
        *dgamma += &(dy * xhat).sum_axis(Axis(0));
        *dbeta += &dy.sum_axis(Axis(0));
        let dxhat = dy * &self.gamma;
        let sum_dxhat = dxhat.sum_axis(Axis(1));
        let sum_dxhat_xhat = (&dxhat * xhat).sum_axis(Axis(1));
        let mut dx = Array2::<f64>::zeros(dy.raw_dim());
        for i in 0..dy.nrows() {
            let s1 = sum_dxhat[i];
            let s2 = sum_dxhat_xhat[i];
            let inv = invstd[i];
            for j in 0..dy.ncols() {
                dx[[i, j]] = inv / d * (d * dxhat[[i, j]] - s1 - xhat[[i, j]] * s2);
            }
        }
        dx
    }
}

#[derive(Debug, Clone)]
pub(crate) struct EncoderLayer {
    pub ln1: LayerNorm,
    pub wq: Array2<f64>,
    pub bq: Array1<f64>,
    pub wk: Array2<f64>,
    pub bk: Array1<f64>,
    pub wv: Array2<f64>,
    pub bv: Array1<f64>,
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
    pub ln2: LayerNorm,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// Encoder parameters. The sinusoidal positional table is fixed, derived
/// from the config, and never trained or serialized.
#[derive(Debug, Clone)]
pub struct EncoderWeights {
    pub cfg: EncoderConfig,
    pub(crate) embed: Array2<f64>,
    pub(crate) pos: Array2<f64>,
    pub(crate) layers: Vec<EncoderLayer>,
    pub(crate) final_ln: LayerNorm,
}

struct LayerCache {
    xhat1: Array2<f64>,
    invstd1: Array1<f64>,
    xn1: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    attn: Vec<Array2<f64>>,
    ctx: Array2<f64>,
    xhat2: Array2<f64>,
    invstd2: Array1<f64>,
    xn2: Array2<f64>,
    ffn_pre: Array2<f64>,
    ffn_act: Array2<f64>,
}

struct ExampleCache {
    ids: Vec<usize>,
    layers: Vec<LayerCache>,
    xhat_f: Array2<f64>,
    invstd_f: Array1<f64>,
}

pub struct EncoderCache {
    examples: Vec<ExampleCache>,
}

/// Batch encode result: pooled embeddings plus per-example truncation
/// flags; train mode additionally carries the activation cache.
pub struct EncodeOutput {
    pub pooled: Array2<f64>,
    pub truncated: Vec<bool>,
    cache: Option<EncoderCache>,
}

#[derive(Debug)]
pub struct EncoderGradients {
    pub(crate) embed: Array2<f64>,
    pub(crate) layers: Vec<LayerGradients>,
    pub(crate) final_gamma: Array1<f64>,
    pub(crate) final_beta: Array1<f64>,
}

#[derive(Debug)]
pub(crate) struct LayerGradients {
    pub ln1_gamma: Array1<f64>,
    pub ln1_beta: Array1<f64>,
    pub wq: Array2<f64>,
    pub bq: Array1<f64>,
    pub wk: Array2<f64>,
    pub bk: Array1<f64>,
    pub wv: Array2<f64>,
    pub bv: Array1<f64>,
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
    pub ln2_gamma: Array1<f64>,
    pub ln2_beta: Array1<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

fn sinusoidal_table(max_len: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((max_len, d), |(p, j)| {
        let i = (j / 2) as f64;
        let angle = p as f64 / 10_000f64.powf(2.0 * i / d as f64);
        if j % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

fn softmax_rows(x: &mut Array2<f64>) {
    for mut row in x.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: f64 = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

impl EncoderWeights {
    pub fn init(cfg: EncoderConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let d = cfg.embed_dim;
        let embed = glorot_uniform(&mut rng, VOCAB_SIZE, d);
        let layers = (0..cfg.num_layers)
            .map(|_| EncoderLayer {
                ln1: LayerNorm::new(d),
                wq: glorot_uniform(&mut rng, d, d),
                bq: zeros1(d),
                wk: glorot_uniform(&mut rng, d, d),
                bk: zeros1(d),
                wv: glorot_uniform(&mut rng, d, d),
                bv: zeros1(d),
                wo: glorot_uniform(&mut rng, d, d),
                bo: zeros1(d),
                ln2: LayerNorm::new(d),
                w1: glorot_uniform(&mut rng, d, cfg.ffn_dim),
                b1: zeros1(cfg.ffn_dim),
                w2: glorot_uniform(&mut rng, cfg.ffn_dim, d),
                b2: zeros1(d),
            })
            .collect();
        let pos = sinusoidal_table(cfg.max_len, d);
        Ok(EncoderWeights {
            cfg,
            embed,
            pos,
            layers,
            final_ln: LayerNorm::new(d),
        })
    }

    /// Deterministic eval-mode batch encode.
    pub fn encode_eval(&self, domains: &[DomainName]) -> Result<EncodeOutput> {
        self.encode_inner(domains, false)
    }

    /// Train-mode batch encode; the returned output carries the activation
    /// cache [`EncoderWeights::backward`] consumes.
    pub fn encode_train(&self, domains: &[DomainName]) -> Result<EncodeOutput> {
        self.encode_inner(domains, true)
    }

    fn encode_inner(&self, domains: &[DomainName], train: bool) -> Result<EncodeOutput> {
        if domains.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let d = self.cfg.embed_dim;
        let mut pooled = Array2::<f64>::zeros((domains.len(), d));
        let mut truncated = vec![false; domains.len()];
        let mut examples = Vec::with_capacity(if train { domains.len() } else { 0 });
        for (row, domain) in domains.iter().enumerate() {
            let bytes = domain.as_str().as_bytes();
            if bytes.is_empty() {
                return Err(Error::EmptyDomain);
            }
            truncated[row] = bytes.len() > self.cfg.max_len;
            let ids: Vec<usize> = bytes
                .iter()
                .take(self.cfg.max_len)
                .map(|&b| b as usize)
                .collect();
            let (vec, cache) = self.encode_one(&ids, train);
            pooled.row_mut(row).assign(&vec);
            if let Some(c) = cache {
                examples.push(c);
            }
        }
        Ok(EncodeOutput {
            pooled,
            truncated,
            cache: train.then_some(EncoderCache { examples }),
        })
    }

    fn encode_one(&self, ids: &[usize], train: bool) -> (Array1<f64>, Option<ExampleCache>) {
        let d = self.cfg.embed_dim;
        let heads = self.cfg.num_heads;
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let len = ids.len();

        let mut x = Array2::<f64>::zeros((len, d));
        for (p, &id) in ids.iter().enumerate() {
            let row = &self.embed.row(id) + &self.pos.row(p);
            x.row_mut(p).assign(&row);
        }

        let mut layer_caches = Vec::with_capacity(if train { self.layers.len() } else { 0 });
        for layer in &self.layers {
            let x_in = x;
            let (xn1, xhat1, invstd1) = layer.ln1.forward(&x_in);
            let q = xn1.dot(&layer.wq) + &layer.bq;
            let k = xn1.dot(&layer.wk) + &layer.bk;
            let v = xn1.dot(&layer.wv) + &layer.bv;
            let mut ctx = Array2::<f64>::zeros((len, d));
            let mut attn = Vec::with_capacity(heads);
            for h in 0..heads {
                let cols = h * dh..(h + 1) * dh;
                let qh = q.slice(ndarray::s![.., cols.clone()]);
                let kh = k.slice(ndarray::s![.., cols.clone()]);
                let vh = v.slice(ndarray::s![.., cols.clone()]);
                let mut scores = qh.dot(&kh.t());
                scores.mapv_inplace(|s| s * scale);
                softmax_rows(&mut scores);
                let ctx_h = scores.dot(&vh);
                ctx.slice_mut(ndarray::s![.., cols]).assign(&ctx_h);
                attn.push(scores);
            }
            let attn_out = ctx.dot(&layer.wo) + &layer.bo;
            let x_mid = &x_in + &attn_out;
            let (xn2, xhat2, invstd2) = layer.ln2.forward(&x_mid);
            let ffn_pre = xn2.dot(&layer.w1) + &layer.b1;
            let ffn_act = ffn_pre.mapv(|v| v.max(0.0));
            let ffn_out = ffn_act.dot(&layer.w2) + &layer.b2;
            x = &x_mid + &ffn_out;
            if train {
                layer_caches.push(LayerCache {
                    xhat1,
                    invstd1,
                    xn1,
                    q,
                    k,
                    v,
                    attn,
                    ctx,
                    xhat2,
                    invstd2,
                    xn2,
                    ffn_pre,
                    ffn_act,
                });
            }
        }
        let x_final = x;
        let (xnf, xhat_f, invstd_f) = self.final_ln.forward(&x_final);
        let pooled = xnf.mean_axis(Axis(0)).unwrap();
        let cache = train.then(|| ExampleCache {
            ids: ids.to_vec(),
            layers: layer_caches,
            xhat_f,
            invstd_f,
        });
        (pooled, cache)
    }

    /// Backpropagate `grad_pooled` (batch × d) through the cached train-mode
    /// encode. The positional table is fixed and receives no gradient.
    pub fn backward(
        &self,
        out: &EncodeOutput,
        grad_pooled: &Array2<f64>,
    ) -> Result<EncoderGradients> {
        let cache = out.cache.as_ref().ok_or(Error::StaleActivations)?;
        assert_eq!(
            grad_pooled.nrows(),
            cache.examples.len(),
            "pooled gradient batch mismatch"
        );
        let d = self.cfg.embed_dim;
        assert_eq!(grad_pooled.ncols(), d, "pooled gradient width mismatch");
        let heads = self.cfg.num_heads;
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();

        let mut grads = EncoderGradients {
            embed: Array2::zeros((VOCAB_SIZE, d)),
            layers: self
                .layers
                .iter()
                .map(|_| LayerGradients {
                    ln1_gamma: Array1::zeros(d),
                    ln1_beta: Array1::zeros(d),
                    wq: Array2::zeros((d, d)),
                    bq: Array1::zeros(d),
                    wk: Array2::zeros((d, d)),
                    bk: Array1::zeros(d),
                    wv: Array2::zeros((d, d)),
                    bv: Array1::zeros(d),
                    wo: Array2::zeros((d, d)),
                    bo: Array1::zeros(d),
                    ln2_gamma: Array1::zeros(d),
                    ln2_beta: Array1::zeros(d),
                    w1: Array2::zeros((d, self.cfg.ffn_dim)),
                    b1: Array1::zeros(self.cfg.ffn_dim),
                    w2: Array2::zeros((self.cfg.ffn_dim, d)),
                    b2: Array1::zeros(d),
                })
                .collect(),
            final_gamma: Array1::zeros(d),
            final_beta: Array1::zeros(d),
        };

        for (row, ex) in cache.examples.iter().enumerate() {
            let len = ex.ids.len();
            // mean pool: every real position shares the pooled gradient
            let mut d_xnf = Array2::<f64>::zeros((len, d));
            let g = grad_pooled.row(row);
            for mut r in d_xnf.rows_mut() {
                r.assign(&(&g / len as f64));
            }
            let mut d_x = self.final_ln.backward(
                &d_xnf,
                &ex.xhat_f,
                &ex.invstd_f,
                &mut grads.final_gamma,
                &mut grads.final_beta,
            );
            for (layer, (lc, lg)) in self
                .layers
                .iter()
                .zip(ex.layers.iter().zip(grads.layers.iter_mut()))
                .rev()
            {
                // x_out = x_mid + relu(xn2·w1 + b1)·w2 + b2
                let d_ffn_out = &d_x;
                lg.w2 += &lc.ffn_act.t().dot(d_ffn_out);
                lg.b2 += &d_ffn_out.sum_axis(Axis(0));
                let mut d_ffn_act = d_ffn_out.dot(&layer.w2.t());
                ndarray::Zip::from(&mut d_ffn_act)
                    .and(&lc.ffn_pre)
                    .for_each(|g, &p| {
                        if p <= 0.0 {
                            *g = 0.0;
                        }
                    });
                lg.w1 += &lc.xn2.t().dot(&d_ffn_act);
                lg.b1 += &d_ffn_act.sum_axis(Axis(0));
                let d_xn2 = d_ffn_act.dot(&layer.w1.t());
                let mut d_x_mid = layer.ln2.backward(
                    &d_xn2,
                    &lc.xhat2,
                    &lc.invstd2,
                    &mut lg.ln2_gamma,
                    &mut lg.ln2_beta,
                );
                d_x_mid += &d_x; // residual branch

                // x_mid = x_in + ctx·wo + bo
                let d_attn_out = &d_x_mid;
                lg.wo += &lc.ctx.t().dot(d_attn_out);
                lg.bo += &d_attn_out.sum_axis(Axis(0));
                let d_ctx = d_attn_out.dot(&layer.wo.t());
                let mut d_q = Array2::<f64>::zeros((len, d));
                let mut d_k = Array2::<f64>::zeros((len, d));
                let mut d_v = Array2::<f64>::zeros((len, d));
                for h in 0..heads {
                    let cols = h * dh..(h + 1) * dh;
                    let a = &lc.attn[h];
                    let d_ctx_h = d_ctx.slice(ndarray::s![.., cols.clone()]);
                    let vh = lc.v.slice(ndarray::s![.., cols.clone()]);
                    let qh = lc.q.slice(ndarray::s![.., cols.clone()]);
                    let kh = lc.k.slice(ndarray::s![.., cols.clone()]);
                    let d_a = d_ctx_h.dot(&vh.t());
                    let d_vh = a.t().dot(&d_ctx_h);
                    // softmax rows backward
                    let mut d_scores = Array2::<f64>::zeros((len, len));
                    for i in 0..len {
                        let arow = a.row(i);
                        let drow = d_a.row(i);
                        let dot: f64 = arow.iter().zip(drow.iter()).map(|(x, y)| x * y).sum();
                        for j in 0..len {
                            d_scores[[i, j]] = arow[j] * (drow[j] - dot);
                        }
                    }
                    d_scores.mapv_inplace(|v| v * scale);
                    let d_qh = d_scores.dot(&kh);
                    let d_kh = d_scores.t().dot(&qh);
                    d_q.slice_mut(ndarray::s![.., cols.clone()]).assign(&d_qh);
                    d_k.slice_mut(ndarray::s![.., cols.clone()]).assign(&d_kh);
                    d_v.slice_mut(ndarray::s![.., cols]).assign(&d_vh);
                }
                lg.wq += &lc.xn1.t().dot(&d_q);
                lg.bq += &d_q.sum_axis(Axis(0));
                lg.wk += &lc.xn1.t().dot(&d_k);
                lg.bk += &d_k.sum_axis(Axis(0));
                lg.wv += &lc.xn1.t().dot(&d_v);
                lg.bv += &d_v.sum_axis(Axis(0));
                let d_xn1 =
                    d_q.dot(&layer.wq.t()) + d_k.dot(&layer.wk.t()) + d_v.dot(&layer.wv.t());
                let mut d_x_in = layer.ln1.backward(
                    &d_xn1,
                    &lc.xhat1,
                    &lc.invstd1,
                    &mut lg.ln1_gamma,
                    &mut lg.ln1_beta,
                );
                d_x_in += &d_x_mid; // residual branch
                d_x = d_x_in;
            }
            for (p, &id) in ex.ids.iter().enumerate() {
                let mut target = grads.embed.row_mut(id);
                target += &d_x.row(p);
            }
        }
        Ok(grads)
    }

    /// Learnable tensors in a fixed order: embedding table, then per layer
    /// `ln1.gamma, ln1.beta, wq, bq, wk, bk, wv, bv, wo, bo, ln2.gamma,
    /// ln2.beta, w1, b1, w2, b2`, then the final layer norm.
    pub fn learnable_views(&self) -> Vec<ArrayViewD<'_, f64>> {
        let mut v: Vec<ArrayViewD<'_, f64>> = vec![self.embed.view().into_dyn()];
        for l in &self.layers {
            v.push(l.ln1.gamma.view().into_dyn());
            v.push(l.ln1.beta.view().into_dyn());
            v.push(l.wq.view().into_dyn());
            v.push(l.bq.view().into_dyn());
            v.push(l.wk.view().into_dyn());
            v.push(l.bk.view().into_dyn());
            v.push(l.wv.view().into_dyn());
            v.push(l.bv.view().into_dyn());
            v.push(l.wo.view().into_dyn());
            v.push(l.bo.view().into_dyn());
            v.push(l.ln2.gamma.view().into_dyn());
            v.push(l.ln2.beta.view().into_dyn());
            v.push(l.w1.view().into_dyn());
            v.push(l.b1.view().into_dyn());
            v.push(l.w2.view().into_dyn());
            v.push(l.b2.view().into_dyn());
        }
        v.push(self.final_ln.gamma.view().into_dyn());
        v.push(self.final_ln.beta.view().into_dyn());
        v
    }

    pub fn learnable_views_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        let mut v: Vec<ArrayViewMutD<'_, f64>> = vec![self.embed.view_mut().into_dyn()];
        for l in &mut self.layers {
            v.push(l.ln1.gamma.view_mut().into_dyn());
            v.push(l.ln1.beta.view_mut().into_dyn());
            v.push(l.wq.view_mut().into_dyn());
            v.push(l.bq.view_mut().into_dyn());
            v.push(l.wk.view_mut().into_dyn());
            v.push(l.bk.view_mut().into_dyn());
            v.push(l.wv.view_mut().into_dyn());
            v.push(l.bv.view_mut().into_dyn());
            v.push(l.wo.view_mut().into_dyn());
            v.push(l.bo.view_mut().into_dyn());
            v.push(l.ln2.gamma.view_mut().into_dyn());
            v.push(l.ln2.beta.view_mut().into_dyn());
            v.push(l.w1.view_mut().into_dyn());
            v.push(l.b1.view_mut().into_dyn());
            v.push(l.w2.view_mut().into_dyn());
            v.push(l.b2.view_mut().into_dyn());
        }
        v.push(self.final_ln.gamma.view_mut().into_dyn());
        v.push(self.final_ln.beta.view_mut().into_dyn());
        v
    }

    pub fn named_tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut v: Vec<(String, ArrayViewD<'_, f64>)> =
            vec![("encoder.embed".into(), self.embed.view().into_dyn())];
        for (i, l) in self.layers.iter().enumerate() {
            let p = format!("encoder.layer{i}");
            v.push((format!("{p}.ln1.gamma"), l.ln1.gamma.view().into_dyn()));
            v.push((format!("{p}.ln1.beta"), l.ln1.beta.view().into_dyn()));
            v.push((format!("{p}.wq"), l.wq.view().into_dyn()));
            v.push((format!("{p}.bq"), l.bq.view().into_dyn()));
            v.push((format!("{p}.wk"), l.wk.view().into_dyn()));
            v.push((format!("{p}.bk"), l.bk.view().into_dyn()));
            v.push((format!("{p}.wv"), l.wv.view().into_dyn()));
            v.push((format!("{p}.bv"), l.bv.view().into_dyn()));
            v.push((format!("{p}.wo"), l.wo.view().into_dyn()));
            v.push((format!("{p}.bo"), l.bo.view().into_dyn()));
            v.push((format!("{p}.ln2.gamma"), l.ln2.gamma.view().into_dyn()));
            v.push((format!("{p}.ln2.beta"), l.ln2.beta.view().into_dyn()));
            v.push((format!("{p}.w1"), l.w1.view().into_dyn()));
            v.push((format!("{p}.b1"), l.b1.view().into_dyn()));
            v.push((format!("{p}.w2"), l.w2.view().into_dyn()));
            v.push((format!("{p}.b2"), l.b2.view().into_dyn()));
        }
        v.push((
            "encoder.final_ln.gamma".into(),
            self.final_ln.gamma.view().into_dyn(),
        ));
        v.push((
            "encoder.final_ln.beta".into(),
            self.final_ln.beta.view().into_dyn(),
        ));
        v
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut v: Vec<(String, ArrayViewMutD<'_, f64>)> =
            vec![("encoder.embed".into(), self.embed.view_mut().into_dyn())];
        for (i, l) in self.layers.iter_mut().enumerate() {
            let p = format!("encoder.layer{i}");
            v.push((format!("{p}.ln1.gamma"), l.ln1.gamma.view_mut().into_dyn()));
            v.push((format!("{p}.ln1.beta"), l.ln1.beta.view_mut().into_dyn()));
            v.push((format!("{p}.wq"), l.wq.view_mut().into_dyn()));
            v.push((format!("{p}.bq"), l.bq.view_mut().into_dyn()));
            v.push((format!("{p}.wk"), l.wk.view_mut().into_dyn()));
            v.push((format!("{p}.bk"), l.bk.view_mut().into_dyn()));
            v.push((format!("{p}.wv"), l.wv.view_mut().into_dyn()));
            v.push((format!("{p}.bv"), l.bv.view_mut().into_dyn()));
            v.push((format!("{p}.wo"), l.wo.view_mut().into_dyn()));
            v.push((format!("{p}.bo"), l.bo.view_mut().into_dyn()));
            v.push((format!("{p}.ln2.gamma"), l.ln2.gamma.view_mut().into_dyn()));
            v.push((format!("{p}.ln2.beta"), l.ln2.beta.view_mut().into_dyn()));
            v.push((format!("{p}.w1"), l.w1.view_mut().into_dyn()));
            v.push((format!("{p}.b1"), l.b1.view_mut().into_dyn()));
            v.push((format!("{p}.w2"), l.w2.view_mut().into_dyn()));
            v.push((format!("{p}.b2"), l.b2.view_mut().into_dyn()));
        }
        v.push((
            "encoder.final_ln.gamma".into(),
            self.final_ln.gamma.view_mut().into_dyn(),
        ));
        v.push((
            "encoder.final_ln.beta".into(),
            self.final_ln.beta.view_mut().into_dyn(),
        ));
        v
    }
}

impl EncoderGradients {
    /// Same order as [`EncoderWeights::learnable_views`].
    pub fn views(&self) -> Vec<ArrayViewD<'_, f64>> {
        let mut v: Vec<ArrayViewD<'_, f64>> = vec![self.embed.view().into_dyn()];
        for l in &self.layers {
            v.push(l.ln1_gamma.view().into_dyn());
            v.push(l.ln1_beta.view().into_dyn());
            v.push(l.wq.view().into_dyn());
            v.push(l.bq.view().into_dyn());
            v.push(l.wk.view().into_dyn());
            v.push(l.bk.view().into_dyn());
            v.push(l.wv.view().into_dyn());
            v.push(l.bv.view().into_dyn());
            v.push(l.wo.view().into_dyn());
            v.push(l.bo.view().into_dyn());
            v.push(l.ln2_gamma.view().into_dyn());
            v.push(l.ln2_beta.view().into_dyn());
            v.push(l.w1.view().into_dyn());
            v.push(l.b1.view().into_dyn());
            v.push(l.w2.view().into_dyn());
            v.push(l.b2.view().into_dyn());
        }
        v.push(self.final_gamma.view().into_dyn());
        v.push(self.final_beta.view().into_dyn());
        v
    }
}
