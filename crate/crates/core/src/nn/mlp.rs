//! The numeric-feature multilayer perceptron.
//!
//! Five fully connected layers; the first four form blocks of
//! affine → batch norm → LeakyReLU(0.1) → dropout, the fifth is a plain
//! affine producing the two-class logits. The fourth block's 16-wide output
//! doubles as the numeric embedding consumed by the fusion classifier.

use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{derive_seed, glorot_uniform, zeros1};
use crate::error::{Error, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub output_dim: usize,
    pub layer_widths: [usize; 4],
    pub leaky_slope: f64,
    pub dropout_ps: [f64; 4],
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            input_dim: 4,
            output_dim: 2,
            layer_widths: [1024, 2056, 512, 16],
            leaky_slope: 0.1,
            dropout_ps: [0.2, 0.2, 0.2, 0.3],
            seed: 0,
        }
    }
}

impl MlpConfig {
    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::InvalidConfig(
                "input_dim and output_dim must be positive".into(),
            ));
        }
        if self.layer_widths.contains(&0) {
            return Err(Error::InvalidConfig("layer widths must be positive".into()));
        }
        if self.dropout_ps.iter().any(|&p| !(0.0..1.0).contains(&p)) {
            return Err(Error::InvalidConfig("dropout p must be in [0,1)".into()));
        }
        if !self.leaky_slope.is_finite() {
            return Err(Error::InvalidConfig("leaky slope must be finite".into()));
        }
        Ok(())
    }

    /// The numeric embedding width (the fourth block's output).
    pub fn embedding_dim(&self) -> usize {
        self.layer_widths[3]
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Affine {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Affine {
    fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w) + &self.b
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

impl BatchNorm {
    fn new(width: usize) -> Self {
        BatchNorm {
            gamma: Array1::ones(width),
            beta: zeros1(width),
            running_mean: zeros1(width),
            running_var: Array1::ones(width),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ForwardMode {
    Train,
    Eval,
}

/// The full parameter set of the five-layer MLP.
#[derive(Debug, Clone)]
pub struct MlpWeights {
    pub cfg: MlpConfig,
    pub(crate) fcs: Vec<Affine>,
    pub(crate) bns: Vec<BatchNorm>,
}

/// Cached per-block values from one forward pass.
#[derive(Debug, Clone)]
struct BlockCache {
    /// Affine output (batch-norm input).
    z: Array2<f64>,
    /// Normalized pre-γβ activations.
    xhat: Array2<f64>,
    /// 1/sqrt(var + eps) per feature, from batch stats in train mode.
    invstd: Array1<f64>,
    /// γ·xhat + β: the LeakyReLU input.
    bn_out: Array2<f64>,
    /// Inverted-dropout mask (0 or 1/(1-p)); `None` in eval mode.
    mask: Option<Array2<f64>>,
    /// Block output (post-dropout in train, post-activation in eval).
    out: Array2<f64>,
}

#[derive(Debug)]
pub struct MlpActivations {
    mode: ForwardMode,
    input: Array2<f64>,
    blocks: Vec<BlockCache>,
    /// The numeric embedding: output of the fourth block.
    pub embedding: Array2<f64>,
    pub logits: Array2<f64>,
}

impl MlpActivations {
    pub fn is_train(&self) -> bool {
        self.mode == ForwardMode::Train
    }

    /// Normalized pre-γβ activations of block `k` (testing/diagnostics).
    pub fn bn_normalized(&self, k: usize) -> &Array2<f64> {
        &self.blocks[k].xhat
    }

    /// Affine output of block `k`, the batch-norm input.
    pub fn affine_out(&self, k: usize) -> &Array2<f64> {
        &self.blocks[k].z
    }
}

/// Upstream gradients entering the MLP backward pass. The fusion path feeds
/// `d_embedding`; the standalone classifier path feeds `d_logits`; both may
/// be present at once, in which case contributions sum at the fourth
/// block's output.
#[derive(Debug, Default)]
pub struct MlpUpstream {
    pub d_logits: Option<Array2<f64>>,
    pub d_embedding: Option<Array2<f64>>,
}

#[derive(Debug)]
pub struct MlpGradients {
    pub(crate) fcs: Vec<(Array2<f64>, Array1<f64>)>,
    pub(crate) bns: Vec<(Array1<f64>, Array1<f64>)>,
}

impl MlpWeights {
    /// Initialize from config: Glorot-uniform weights, zero biases, identity
    /// batch-norm, running stats (0, 1). Fully determined by `cfg.seed`.
    pub fn init(cfg: MlpConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let dims = [
            cfg.input_dim,
            cfg.layer_widths[0],
            cfg.layer_widths[1],
            cfg.layer_widths[2],
            cfg.layer_widths[3],
            cfg.output_dim,
        ];
        let fcs = (0..5)
            .map(|k| Affine {
                w: glorot_uniform(&mut rng, dims[k], dims[k + 1]),
                b: zeros1(dims[k + 1]),
            })
            .collect();
        let bns = (0..4).map(|k| BatchNorm::new(dims[k + 1])).collect();
        Ok(MlpWeights { cfg, fcs, bns })
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.cfg.input_dim {
            return Err(Error::DimMismatch {
                expected: self.cfg.input_dim,
                got: x.ncols(),
            });
        }
        if x.nrows() == 0 {
            return Err(Error::EmptyBatch);
        }
        Ok(())
    }

    /// Deterministic eval-mode forward: running batch-norm stats, identity
    /// dropout.
    pub fn forward_eval(&self, x: &Array2<f64>) -> Result<MlpActivations> {
        self.check_input(x)?;
        let mut cur = x.clone();
        let mut blocks = Vec::with_capacity(4);
        for k in 0..4 {
            let z = self.fcs[k].forward(&cur);
            let bn = &self.bns[k];
            let invstd = bn.running_var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
            let xhat = (&z - &bn.running_mean) * &invstd;
            let bn_out = &xhat * &bn.gamma + &bn.beta;
            let slope = self.cfg.leaky_slope;
            let out = bn_out.mapv(|v| if v > 0.0 { v } else { slope * v });
            cur = out.clone();
            blocks.push(BlockCache {
                z,
                xhat,
                invstd,
                bn_out,
                mask: None,
                out,
            });
        }
        let embedding = cur.clone();
        let logits = self.fcs[4].forward(&cur);
        Ok(MlpActivations {
            mode: ForwardMode::Eval,
            input: x.clone(),
            blocks,
            embedding,
            logits,
        })
    }

    /// Train-mode forward: normalizes with batch statistics, updates running
    /// stats with momentum 0.1, applies inverted dropout keyed by
    /// `dropout_seed`. Needs a batch of at least 2 rows.
    pub fn forward_train(&mut self, x: &Array2<f64>, dropout_seed: u64) -> Result<MlpActivations> {
        self.check_input(x)?;
        if x.nrows() < 2 {
            return Err(Error::BatchTooSmall(x.nrows()));
        }
        let n = x.nrows() as f64;
        let mut cur = x.clone();
        let mut blocks = Vec::with_capacity(4);
        for k in 0..4 {
            let z = self.fcs[k].forward(&cur);
            let mean = z.mean_axis(Axis(0)).expect("non-empty batch");
            let centered = &z - &mean;
            let var = centered.mapv(|v| v * v).mean_axis(Axis(0)).unwrap();
            // Normalize with the biased batch variance; track running
            // variance with the unbiased estimate.
            let invstd = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
            let xhat = &centered * &invstd;
            let bn = &mut self.bns[k];
            let var_unbiased = var.mapv(|v| v * n / (n - 1.0));
            bn.running_mean = &bn.running_mean * (1.0 - BN_MOMENTUM) + &mean * BN_MOMENTUM;
            bn.running_var = &bn.running_var * (1.0 - BN_MOMENTUM) + &var_unbiased * BN_MOMENTUM;
            let bn_out = &xhat * &bn.gamma + &bn.beta;
            let slope = self.cfg.leaky_slope;
            let act = bn_out.mapv(|v| if v > 0.0 { v } else { slope * v });
            let p = self.cfg.dropout_ps[k];
            let (mask, out) = if p == 0.0 {
                (Array2::ones(act.raw_dim()), act)
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(dropout_seed, k as u64));
                let keep = 1.0 / (1.0 - p);
                let mask = Array2::from_shape_fn(act.raw_dim(), |_| {
                    if rng.random::<f64>() < p {
                        0.0
                    } else {
                        keep
                    }
                });
                let out = &act * &mask;
                (mask, out)
            };
            cur = out.clone();
            blocks.push(BlockCache {
                z,
                xhat,
                invstd,
                bn_out,
                mask: Some(mask),
                out,
            });
        }
        let embedding = cur.clone();
        let logits = self.fcs[4].forward(&cur);
        Ok(MlpActivations {
            mode: ForwardMode::Train,
            input: x.clone(),
            blocks,
            embedding,
            logits,
        })
    }

    /// Backpropagate through the recorded train-mode forward.
    pub fn backward(&self, acts: &MlpActivations, upstream: &MlpUpstream) -> Result<MlpGradients> {
        if acts.mode != ForwardMode::Train {
            return Err(Error::StaleActivations);
        }
        let batch = acts.input.nrows();
        let emb_dim = self.cfg.embedding_dim();

        let mut fc5_grad = (
            Array2::zeros(self.fcs[4].w.raw_dim()),
            Array1::zeros(self.fcs[4].b.raw_dim()),
        );
        // Gradient flowing into the fourth block's output.
        let mut d_out: Array2<f64> = Array2::zeros((batch, emb_dim));
        if let Some(d_logits) = &upstream.d_logits {
            assert_eq!(d_logits.nrows(), batch, "logit gradient batch mismatch");
            assert_eq!(
                d_logits.ncols(),
                self.cfg.output_dim,
                "logit gradient width mismatch"
            );
            fc5_grad = (acts.embedding.t().dot(d_logits), d_logits.sum_axis(Axis(0)));
            d_out = d_out + d_logits.dot(&self.fcs[4].w.t());
        }
        if let Some(d_emb) = &upstream.d_embedding {
            assert_eq!(d_emb.nrows(), batch, "embedding gradient batch mismatch");
            assert_eq!(d_emb.ncols(), emb_dim, "embedding gradient width mismatch");
            d_out += d_emb;
        }

        let mut fcs_rev: Vec<(Array2<f64>, Array1<f64>)> = Vec::with_capacity(5);
        let mut bns_rev: Vec<(Array1<f64>, Array1<f64>)> = Vec::with_capacity(4);
        let n = batch as f64;
        let mut d_cur = d_out;
        for k in (0..4).rev() {
            let cache = &acts.blocks[k];
            // dropout
            let d_act = match &cache.mask {
                Some(mask) => &d_cur * mask,
                None => d_cur.clone(),
            };
            // LeakyReLU on bn_out
            let slope = self.cfg.leaky_slope;
            let mut d_bn = d_act;
            ndarray::Zip::from(&mut d_bn)
                .and(&cache.bn_out)
                .for_each(|g, &z| {
                    if z <= 0.0 {
                        *g *= slope;
                    }
                });
            // batch norm, batch-statistics form
            let bn = &self.bns[k];
            let dgamma = (&d_bn * &cache.xhat).sum_axis(Axis(0));
            let dbeta = d_bn.sum_axis(Axis(0));
            let dxhat = &d_bn * &bn.gamma;
            let sum_dxhat = dxhat.sum_axis(Axis(0));
            let sum_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(0));
            let dz = (dxhat * n - &sum_dxhat - &cache.xhat * &sum_dxhat_xhat)
                * &cache.invstd.mapv(|v| v / n);
            // affine
            let input_k = if k == 0 {
                &acts.input
            } else {
                &acts.blocks[k - 1].out
            };
            let dw = input_k.t().dot(&dz);
            let db = dz.sum_axis(Axis(0));
            d_cur = dz.dot(&self.fcs[k].w.t());
            fcs_rev.push((dw, db));
            bns_rev.push((dgamma, dbeta));
        }
        fcs_rev.reverse();
        bns_rev.reverse();
        fcs_rev.push(fc5_grad);
        Ok(MlpGradients {
            fcs: fcs_rev,
            bns: bns_rev,
        })
    }

    /// Learnable tensors in a fixed order: `fc{k}.w, fc{k}.b, bn{k}.gamma,
    /// bn{k}.beta` for k = 1..4, then `fc5.w, fc5.b`. Gradient views use the
    /// same order.
    pub fn learnable_views(&self) -> Vec<ArrayViewD<'_, f64>> {
        let mut v = Vec::new();
        for k in 0..4 {
            v.push(self.fcs[k].w.view().into_dyn());
            v.push(self.fcs[k].b.view().into_dyn());
            v.push(self.bns[k].gamma.view().into_dyn());
            v.push(self.bns[k].beta.view().into_dyn());
        }
        v.push(self.fcs[4].w.view().into_dyn());
        v.push(self.fcs[4].b.view().into_dyn());
        v
    }

    pub fn learnable_views_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        let mut v = Vec::new();
        let (fc_head, fc_tail) = self.fcs.split_at_mut(4);
        for (fc, bn) in fc_head.iter_mut().zip(self.bns.iter_mut()) {
            v.push(fc.w.view_mut().into_dyn());
            v.push(fc.b.view_mut().into_dyn());
            v.push(bn.gamma.view_mut().into_dyn());
            v.push(bn.beta.view_mut().into_dyn());
        }
        v.push(fc_tail[0].w.view_mut().into_dyn());
        v.push(fc_tail[0].b.view_mut().into_dyn());
        v
    }

    /// All tensors (learnable + batch-norm running stats) with stable names,
    /// for serialization.
    pub fn named_tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut v = Vec::new();
        for k in 0..4 {
            v.push((
                format!("mlp.fc{}.w", k + 1),
                self.fcs[k].w.view().into_dyn(),
            ));
            v.push((
                format!("mlp.fc{}.b", k + 1),
                self.fcs[k].b.view().into_dyn(),
            ));
            v.push((
                format!("mlp.bn{}.gamma", k + 1),
                self.bns[k].gamma.view().into_dyn(),
            ));
            v.push((
                format!("mlp.bn{}.beta", k + 1),
                self.bns[k].beta.view().into_dyn(),
            ));
            v.push((
                format!("mlp.bn{}.running_mean", k + 1),
                self.bns[k].running_mean.view().into_dyn(),
            ));
            v.push((
                format!("mlp.bn{}.running_var", k + 1),
                self.bns[k].running_var.view().into_dyn(),
            ));
        }
        v.push(("mlp.fc5.w".into(), self.fcs[4].w.view().into_dyn()));
        v.push(("mlp.fc5.b".into(), self.fcs[4].b.view().into_dyn()));
        v
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut v = Vec::new();
        let (fc_head, fc_tail) = self.fcs.split_at_mut(4);
        for (k, (fc, bn)) in fc_head.iter_mut().zip(self.bns.iter_mut()).enumerate() {
            v.push((format!("mlp.fc{}.w", k + 1), fc.w.view_mut().into_dyn()));
            v.push((format!("mlp.fc{}.b", k + 1), fc.b.view_mut().into_dyn()));
            v.push((
                format!("mlp.bn{}.gamma", k + 1),
                bn.gamma.view_mut().into_dyn(),
            ));
            v.push((
                format!("mlp.bn{}.beta", k + 1),
                bn.beta.view_mut().into_dyn(),
            ));
            v.push((
                format!("mlp.bn{}.running_mean", k + 1),
                bn.running_mean.view_mut().into_dyn(),
            ));
            v.push((
                format!("mlp.bn{}.running_var", k + 1),
                bn.running_var.view_mut().into_dyn(),
            ));
        }
        v.push(("mlp.fc5.w".into(), fc_tail[0].w.view_mut().into_dyn()));
        v.push(("mlp.fc5.b".into(), fc_tail[0].b.view_mut().into_dyn()));
        v
    }
}

impl MlpGradients {
    /// Same order as [`MlpWeights::learnable_views`].
    pub fn views(&self) -> Vec<ArrayViewD<'_, f64>> {
        let mut v = Vec::new();
        for k in 0..4 {
            v.push(self.fcs[k].0.view().into_dyn());
            v.push(self.fcs[k].1.view().into_dyn());
            v.push(self.bns[k].0.view().into_dyn());
            v.push(self.bns[k].1.view().into_dyn());
        }
        v.push(self.fcs[4].0.view().into_dyn());
        v.push(self.fcs[4].1.view().into_dyn());
        v
    }
}
