//! The training loop: Adam over softmax cross-entropy, seeded batch
//! shuffling, per-epoch validation metrics, early stopping on validation
//! F1, best-epoch weight selection.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{metrics_from_confusion, Dataset, FeatureStats, Hyperparams, Metrics, Provenance};
use crate::domain::DomainName;
use crate::error::{Error, Result};
use crate::nn::encoder::{EncoderConfig, EncoderWeights};
use crate::nn::fusion::{concat_embeddings, cross_entropy, FusionHead, FusionModel, ModelMode};
use crate::nn::mlp::{MlpConfig, MlpUpstream, MlpWeights};
use crate::nn::{derive_seed, Adam};
use crate::similarity::RatioMode;
use crate::train::metrics::confusion;

/// Model-shape and scoring choices that accompany the hyperparameters.
#[derive(Debug, Clone)]
pub struct TrainSetup {
    pub mlp_cfg: MlpConfig,
    pub encoder_cfg: EncoderConfig,
    pub similarity_mode: RatioMode,
    pub threshold: f64,
}

impl Default for TrainSetup {
    fn default() -> Self {
        TrainSetup {
            mlp_cfg: MlpConfig::default(),
            encoder_cfg: EncoderConfig::default(),
            similarity_mode: RatioMode::Paper,
            threshold: 0.5,
        }
    }
}

/// One epoch of history: mean training loss and validation metrics.
#[derive(Debug, Clone)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val: Metrics,
}

impl std::fmt::Display for EpochRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "epoch={} train_loss={:.6} val_accuracy={:.4} val_precision={:.4} val_recall={:.4} val_f1={:.4}",
            self.epoch, self.train_loss, self.val.accuracy, self.val.precision,
            self.val.recall, self.val.f1
        )
    }
}

struct Branches {
    mlp: Option<MlpWeights>,
    encoder: Option<EncoderWeights>,
    head: Option<FusionHead>,
}

impl Branches {
    fn to_model(
        &self,
        mode: ModelMode,
        stats: FeatureStats,
        setup: &TrainSetup,
        hp: &Hyperparams,
    ) -> FusionModel {
        FusionModel {
            mode,
            mlp: self.mlp.clone(),
            encoder: self.encoder.clone(),
            head: self.head.clone(),
            feature_stats: stats,
            threshold: setup.threshold,
            similarity_mode: setup.similarity_mode,
            provenance: Provenance {
                seed: hp.seed,
                hyperparams: hp.clone(),
            },
        }
    }
}

/// Train a model of the requested mode. Returns the weights from the epoch
/// with the best validation F1 plus the per-epoch history. Deterministic
/// for fixed seeds.
pub fn train(
    mode: ModelMode,
    train_ds: &Dataset,
    val_ds: &Dataset,
    hp: &Hyperparams,
    setup: &TrainSetup,
) -> Result<(FusionModel, Vec<EpochRecord>)> {
    hp.validate()?;
    if train_ds.is_empty() || val_ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let stats = train_ds
        .feature_stats
        .unwrap_or_else(FeatureStats::identity);

    let mut mlp_cfg = setup.mlp_cfg.clone();
    mlp_cfg.seed = derive_seed(hp.seed, 100);
    let mut enc_cfg = setup.encoder_cfg.clone();
    enc_cfg.seed = derive_seed(hp.seed, 200);
    let head_seed = derive_seed(hp.seed, 300);

    let mut branches = match mode {
        ModelMode::MlpOnly => Branches {
            mlp: Some(MlpWeights::init(mlp_cfg)?),
            encoder: None,
            head: None,
        },
        ModelMode::NlpOnly => Branches {
            mlp: None,
            encoder: Some(EncoderWeights::init(enc_cfg.clone())?),
            head: Some(FusionHead::init(enc_cfg.embed_dim, head_seed)),
        },
        ModelMode::Fused => Branches {
            mlp: Some(MlpWeights::init(mlp_cfg.clone())?),
            encoder: Some(EncoderWeights::init(enc_cfg.clone())?),
            head: Some(FusionHead::init(
                enc_cfg.embed_dim + mlp_cfg.embedding_dim(),
                head_seed,
            )),
        },
    };

    let mut history = Vec::new();
    if hp.max_epochs == 0 {
        return Ok((branches.to_model(mode, stats, setup, hp), history));
    }

    let x_train = {
        let mut d = train_ds.clone();
        d.feature_stats = Some(stats);
        d.feature_matrix()
    };
    let y_train = train_ds.labels();
    let domains_train = train_ds.domains();
    let n = train_ds.len();

    let mut opt = {
        let views = collect_learnable(&branches);
        Adam::new(
            hp.learning_rate,
            hp.adam_beta1,
            hp.adam_beta2,
            hp.adam_eps,
            &views,
        )
    };

    let mut best: Option<(f64, Branches)> = None;
    let mut epochs_since_improve = 0usize;

    for epoch in 0..hp.max_epochs {
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(hp.seed, 1_000 + epoch as u64));
        idx.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut loss_rows = 0usize;
        for (batch_no, chunk) in idx.chunks(hp.batch_size).enumerate() {
            if chunk.len() < 2 {
                // batch-norm needs at least two rows; a trailing singleton
                // is skipped
                continue;
            }
            let xb = rows_of(&x_train, chunk);
            let yb: Vec<u8> = chunk.iter().map(|&i| y_train[i]).collect();
            let db: Vec<DomainName> = chunk.iter().map(|&i| domains_train[i].clone()).collect();
            let dropout_seed = derive_seed(hp.seed, (epoch as u64) * 1_000_003 + batch_no as u64);

            let loss = step_batch(mode, &mut branches, &xb, &yb, &db, dropout_seed, &mut opt)?;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch: epoch + 1,
                    batch: batch_no + 1,
                });
            }
            loss_sum += loss * chunk.len() as f64;
            loss_rows += chunk.len();
        }

        let snapshot = branches.to_model(mode, stats, setup, hp);
        let val = evaluate(&snapshot, val_ds)?;
        history.push(EpochRecord {
            epoch: epoch + 1,
            train_loss: if loss_rows > 0 {
                loss_sum / loss_rows as f64
            } else {
                f64::NAN
            },
            val,
        });

        let improved = match &best {
            None => true,
            Some((best_f1, _)) => val.f1 > *best_f1,
        };
        if improved {
            best = Some((
                val.f1,
                Branches {
                    mlp: branches.mlp.clone(),
                    encoder: branches.encoder.clone(),
                    head: branches.head.clone(),
                },
            ));
            epochs_since_improve = 0;
        } else {
            epochs_since_improve += 1;
            if epochs_since_improve >= hp.early_stop_patience {
                break;
            }
        }
    }

    let final_branches = best.map(|(_, b)| b).unwrap_or(branches);
    Ok((final_branches.to_model(mode, stats, setup, hp), history))
}

fn rows_of(x: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((idx.len(), x.ncols()));
    for (r, &i) in idx.iter().enumerate() {
        out.row_mut(r).assign(&x.row(i));
    }
    out
}

fn collect_learnable(b: &Branches) -> Vec<ndarray::ArrayViewD<'_, f64>> {
    let mut v = Vec::new();
    if let Some(mlp) = &b.mlp {
        v.extend(mlp.learnable_views());
    }
    if let Some(enc) = &b.encoder {
        v.extend(enc.learnable_views());
    }
    if let Some(head) = &b.head {
        v.extend(head.learnable_views());
    }
    v
}

fn step_batch(
    mode: ModelMode,
    branches: &mut Branches,
    xb: &Array2<f64>,
    yb: &[u8],
    db: &[DomainName],
    dropout_seed: u64,
    opt: &mut Adam,
) -> Result<f64> {
    match mode {
        ModelMode::MlpOnly => {
            let mlp = branches.mlp.as_mut().expect("mlp branch");
            let acts = mlp.forward_train(xb, dropout_seed)?;
            let (loss, d_logits) = cross_entropy(&acts.logits, yb);
            let grads = mlp.backward(
                &acts,
                &MlpUpstream {
                    d_logits: Some(d_logits),
                    d_embedding: None,
                },
            )?;
            let grad_views = grads.views();
            opt.step(&mut mlp.learnable_views_mut(), &grad_views);
            Ok(loss)
        }
        ModelMode::NlpOnly => {
            let enc = branches.encoder.as_ref().expect("encoder branch");
            let head = branches.head.as_ref().expect("probe head");
            let out = enc.encode_train(db)?;
            let logits = head.forward(&out.pooled)?;
            let (loss, d_logits) = cross_entropy(&logits, yb);
            let (dw, db_head, d_pooled) = head.backward(&out.pooled, &d_logits);
            let enc_grads = enc.backward(&out, &d_pooled)?;
            let mut grad_views = enc_grads.views();
            grad_views.push(dw.view().into_dyn());
            grad_views.push(db_head.view().into_dyn());
            let enc_mut = branches.encoder.as_mut().unwrap();
            let head_mut = branches.head.as_mut().unwrap();
            let mut params = enc_mut.learnable_views_mut();
            params.extend(head_mut.learnable_views_mut());
            opt.step(&mut params, &grad_views);
            Ok(loss)
        }
        ModelMode::Fused => {
            let mlp = branches.mlp.as_mut().expect("mlp branch");
            let enc = branches.encoder.as_ref().expect("encoder branch");
            let head = branches.head.as_ref().expect("fusion head");
            let acts = mlp.forward_train(xb, dropout_seed)?;
            let out = enc.encode_train(db)?;
            let fused = concat_embeddings(&out.pooled, &acts.embedding)?;
            let logits = head.forward(&fused)?;
            let (loss, d_logits) = cross_entropy(&logits, yb);
            let (dw, db_head, d_fused) = head.backward(&fused, &d_logits);
            let d_text = d_fused
                .slice(ndarray::s![.., ..out.pooled.ncols()])
                .to_owned();
            let d_num = d_fused
                .slice(ndarray::s![.., out.pooled.ncols()..])
                .to_owned();
            let mlp_grads = mlp.backward(
                &acts,
                &MlpUpstream {
                    d_logits: None,
                    d_embedding: Some(d_num),
                },
            )?;
            let enc_grads = enc.backward(&out, &d_text)?;
            let mut grad_views = mlp_grads.views();
            grad_views.extend(enc_grads.views());
            grad_views.push(dw.view().into_dyn());
            grad_views.push(db_head.view().into_dyn());
            let mlp_mut = branches.mlp.as_mut().unwrap();
            let enc_mut = branches.encoder.as_mut().unwrap();
            let head_mut = branches.head.as_mut().unwrap();
            let mut params = mlp_mut.learnable_views_mut();
            params.extend(enc_mut.learnable_views_mut());
            params.extend(head_mut.learnable_views_mut());
            opt.step(&mut params, &grad_views);
            Ok(loss)
        }
    }
}

/// Eval-mode metrics of a model over a dataset, using the model's decision
/// threshold and its stored feature statistics.
pub fn evaluate(model: &FusionModel, ds: &Dataset) -> Result<Metrics> {
    if ds.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let mut scaled = ds.clone();
    scaled.feature_stats = Some(model.feature_stats);
    let x = scaled.feature_matrix();
    let domains = ds.domains();
    let truth = ds.labels();
    let mut preds = Vec::with_capacity(ds.len());
    // chunked to bound the widest hidden layer's memory
    let chunk = 512;
    let mut start = 0;
    while start < ds.len() {
        let end = (start + chunk).min(ds.len());
        let xb = x.slice(ndarray::s![start..end, ..]).to_owned();
        let logits = model.eval_logits(&domains[start..end], &xb)?;
        for i in 0..logits.nrows() {
            let p = crate::nn::fusion::softmax2([logits[[i, 0]], logits[[i, 1]]])[1];
            preds.push(if p >= model.threshold { 1 } else { 0 });
        }
        start = end;
    }
    let c = confusion(&preds, &truth)?;
    metrics_from_confusion(&c)
}
