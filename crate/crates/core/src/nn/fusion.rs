//! Fusion of the text and numeric embeddings into the benign/suspicious
//! decision.
//!
//! The two branch embeddings are concatenated and fed to a single linear
//! classifier; softmax cross-entropy is the training loss. Standalone
//! modes reuse the same loss: MLP-only classifies with its own fifth
//! layer, NLP-only attaches a linear probe to the encoder output.

use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::EncoderWeights;
use super::glorot_uniform;
use super::mlp::MlpWeights;
use crate::domain::{DomainName, FeatureRow};
use crate::error::{Error, Result};
use crate::similarity::RatioMode;
use crate::train::{FeatureStats, Provenance};

/// Which branches the trained artifact uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelMode {
    MlpOnly,
    NlpOnly,
    Fused,
}

impl std::fmt::Display for ModelMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelMode::MlpOnly => f.write_str("mlp"),
            ModelMode::NlpOnly => f.write_str("nlp"),
            ModelMode::Fused => f.write_str("fused"),
        }
    }
}

impl std::str::FromStr for ModelMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mlp" => Ok(ModelMode::MlpOnly),
            "nlp" => Ok(ModelMode::NlpOnly),
            "fused" => Ok(ModelMode::Fused),
            other => Err(format!("unknown model mode {other:?} (mlp|nlp|fused)")),
        }
    }
}

/// Linear classification head over a (fused) embedding.
#[derive(Debug, Clone)]
pub struct FusionHead {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl FusionHead {
    pub fn init(input_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FusionHead {
            w: glorot_uniform(&mut rng, input_dim, 2),
            b: Array1::zeros(2),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.w.nrows() {
            return Err(Error::DimMismatch {
                expected: self.w.nrows(),
                got: x.ncols(),
            });
        }
        Ok(x.dot(&self.w) + &self.b)
    }

    /// Returns (dW, db, dX).
    pub fn backward(
        &self,
        x: &Array2<f64>,
        d_logits: &Array2<f64>,
    ) -> (Array2<f64>, Array1<f64>, Array2<f64>) {
        let dw = x.t().dot(d_logits);
        let db = d_logits.sum_axis(Axis(0));
        let dx = d_logits.dot(&self.w.t());
        (dw, db, dx)
    }

    pub fn learnable_views(&self) -> Vec<ArrayViewD<'_, f64>> {
        vec![self.w.view().into_dyn(), self.b.view().into_dyn()]
    }

    pub fn learnable_views_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        vec![self.w.view_mut().into_dyn(), self.b.view_mut().into_dyn()]
    }

    pub fn named_tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        vec![
            ("head.w".into(), self.w.view().into_dyn()),
            ("head.b".into(), self.b.view().into_dyn()),
        ]
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        vec![
            ("head.w".into(), self.w.view_mut().into_dyn()),
            ("head.b".into(), self.b.view_mut().into_dyn()),
        ]
    }
}

/// Column-concatenate the two branch embeddings.
pub fn concat_embeddings(text_emb: &Array2<f64>, num_emb: &Array2<f64>) -> Result<Array2<f64>> {
    if text_emb.nrows() != num_emb.nrows() {
        return Err(Error::DimMismatch {
            expected: text_emb.nrows(),
            got: num_emb.nrows(),
        });
    }
    Ok(
        ndarray::concatenate(Axis(1), &[text_emb.view(), num_emb.view()])
            .expect("row counts verified"),
    )
}

/// Fused logits: `concat(text_emb, num_emb) · W + b`.
pub fn fuse_forward(
    text_emb: &Array2<f64>,
    num_emb: &Array2<f64>,
    head: &FusionHead,
) -> Result<Array2<f64>> {
    let fused = concat_embeddings(text_emb, num_emb)?;
    head.forward(&fused)
}

/// Mean softmax cross-entropy over the batch with log-sum-exp
/// stabilization. Returns the loss and the gradient w.r.t. the logits,
/// `(softmax - onehot) / batch`.
pub fn cross_entropy(logits: &Array2<f64>, labels: &[u8]) -> (f64, Array2<f64>) {
    assert_eq!(logits.nrows(), labels.len(), "label count mismatch");
    assert_eq!(logits.ncols(), 2, "two-class logits expected");
    assert!(labels.iter().all(|&l| l <= 1), "labels must be 0 or 1");
    let n = labels.len() as f64;
    let mut loss = 0.0;
    let mut grad = Array2::<f64>::zeros(logits.raw_dim());
    for (i, &label) in labels.iter().enumerate() {
        let row = logits.row(i);
        let max = row[0].max(row[1]);
        let lse = max + ((row[0] - max).exp() + (row[1] - max).exp()).ln();
        loss += lse - row[label as usize];
        for j in 0..2 {
            let p = (row[j] - lse).exp();
            let onehot = if j == label as usize { 1.0 } else { 0.0 };
            grad[[i, j]] = (p - onehot) / n;
        }
    }
    (loss / n, grad)
}

/// Softmax probabilities for one two-class logit pair.
pub fn softmax2(logits: [f64; 2]) -> [f64; 2] {
    let max = logits[0].max(logits[1]);
    let e0 = (logits[0] - max).exp();
    let e1 = (logits[1] - max).exp();
    let z = e0 + e1;
    [e0 / z, e1 / z]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Benign,
    Suspicious,
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Label::Benign => f.write_str("benign"),
            Label::Suspicious => f.write_str("suspicious"),
        }
    }
}

/// A scoring decision with its evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub label: Label,
    pub p_suspicious: f64,
    pub logits: [f64; 2],
}

/// The trained artifact: branch weights, classification head, feature
/// scaling, decision threshold, and training provenance.
#[derive(Debug, Clone)]
pub struct FusionModel {
    pub mode: ModelMode,
    pub mlp: Option<MlpWeights>,
    pub encoder: Option<EncoderWeights>,
    pub head: Option<FusionHead>,
    pub feature_stats: FeatureStats,
    pub threshold: f64,
    pub similarity_mode: RatioMode,
    pub provenance: Provenance,
}

impl FusionModel {
    /// Eval-mode logits for a batch. `features` rows must already be
    /// standardized with this model's stats.
    pub fn eval_logits(
        &self,
        domains: &[DomainName],
        features: &Array2<f64>,
    ) -> Result<Array2<f64>> {
        match self.mode {
            ModelMode::MlpOnly => {
                let mlp = self.mlp.as_ref().expect("mlp mode carries mlp weights");
                Ok(mlp.forward_eval(features)?.logits)
            }
            ModelMode::NlpOnly => {
                let enc = self.encoder.as_ref().expect("nlp mode carries encoder");
                let head = self.head.as_ref().expect("nlp mode carries probe head");
                let text = enc.encode_eval(domains)?;
                head.forward(&text.pooled)
            }
            ModelMode::Fused => {
                let mlp = self.mlp.as_ref().expect("fused mode carries mlp weights");
                let enc = self.encoder.as_ref().expect("fused mode carries encoder");
                let head = self.head.as_ref().expect("fused mode carries head");
                let text = enc.encode_eval(domains)?;
                let num = mlp.forward_eval(features)?;
                fuse_forward(&text.pooled, &num.embedding, head)
            }
        }
    }

    /// Score one domain: deterministic eval-mode forward, softmax,
    /// threshold at `p_suspicious >= threshold`.
    pub fn predict(&self, domain: &DomainName, features: &FeatureRow) -> Result<Verdict> {
        self.predict_with_threshold(domain, features, self.threshold)
    }

    pub fn predict_with_threshold(
        &self,
        domain: &DomainName,
        features: &FeatureRow,
        threshold: f64,
    ) -> Result<Verdict> {
        let scaled = self.feature_stats.apply(features);
        let x = Array2::from_shape_vec((1, 4), scaled.to_vec()).expect("fixed shape");
        let logits = self.eval_logits(std::slice::from_ref(domain), &x)?;
        let pair = [logits[[0, 0]], logits[[0, 1]]];
        let probs = softmax2(pair);
        let p_suspicious = probs[1];
        let label = if p_suspicious >= threshold {
            Label::Suspicious
        } else {
            Label::Benign
        };
        Ok(Verdict {
            label,
            p_suspicious,
            logits: pair,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn zero_weights_pass_bias_through() {
        let head = FusionHead {
            w: Array2::zeros((6, 2)),
            b: ndarray::arr1(&[0.3, -0.3]),
        };
        let text = Array2::zeros((3, 4));
        let num = Array2::zeros((3, 2));
        let logits = fuse_forward(&text, &num, &head).unwrap();
        for i in 0..3 {
            assert_eq!(logits[[i, 0]], 0.3);
            assert_eq!(logits[[i, 1]], -0.3);
        }
    }

    #[test]
    fn fused_logit_shape() {
        let head = FusionHead::init(32 + 16, 1);
        let text = Array2::zeros((4, 32));
        let num = Array2::zeros((4, 16));
        assert_eq!(fuse_forward(&text, &num, &head).unwrap().dim(), (4, 2));
    }

    #[test]
    fn fuse_rejects_mismatched_widths() {
        let head = FusionHead::init(10, 1);
        let text = Array2::zeros((4, 4));
        let num = Array2::zeros((4, 2));
        assert!(matches!(
            fuse_forward(&text, &num, &head),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn cross_entropy_uniform_logits() {
        let logits = arr2(&[[0.0, 0.0]]);
        let (loss, _) = cross_entropy(&logits, &[1]);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_is_stable_at_extreme_logits() {
        let logits = arr2(&[[1000.0, -1000.0]]);
        let (loss, grad) = cross_entropy(&logits, &[0]);
        assert!(loss.is_finite());
        assert!(loss.abs() < 1e-9);
        assert!(grad.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn cross_entropy_grad_is_softmax_minus_onehot() {
        let logits = arr2(&[[0.2, -0.4], [1.5, 0.1]]);
        let (_, grad) = cross_entropy(&logits, &[0, 1]);
        for i in 0..2 {
            let p = softmax2([logits[[i, 0]], logits[[i, 1]]]);
            let label = [0usize, 1][i];
            for j in 0..2 {
                let onehot = if j == label { 1.0 } else { 0.0 };
                assert!((grad[[i, j]] - (p[j] - onehot) / 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn softmax_probabilities_sum_to_one() {
        for pair in [[0.0, 0.0], [3.5, -2.0], [-700.0, 700.0], [1e8, 1e8]] {
            let p = softmax2(pair);
            assert!((p[0] + p[1] - 1.0).abs() < 1e-12, "pair {pair:?}");
        }
    }

    #[test]
    fn raising_suspicious_logit_never_flips_to_benign() {
        let mut prev = softmax2([0.5, -4.0])[1];
        for step in 1..100 {
            let p = softmax2([0.5, -4.0 + step as f64 * 0.1])[1];
            assert!(p >= prev);
            prev = p;
        }
    }
}
