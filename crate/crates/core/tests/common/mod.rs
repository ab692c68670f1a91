//! Shared fixtures for the integration suites: the central-difference
//! gradient checker and reduced-dimension model builders.

#![allow(dead_code)]

use ndarray::{Array2, ArrayD, ArrayViewMutD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use regrisk::domain::DomainName;
use regrisk::nn::encoder::{EncoderConfig, EncoderWeights};
use regrisk::nn::fusion::{concat_embeddings, cross_entropy, FusionHead};
use regrisk::nn::mlp::{MlpConfig, MlpUpstream, MlpWeights};

pub fn dn(s: &str) -> DomainName {
    DomainName::normalize(s, false).unwrap()
}

/// Reduced MLP: 4 -> 8 -> 8 -> 8 -> 4 -> 2.
pub fn small_mlp_cfg(seed: u64) -> MlpConfig {
    MlpConfig {
        input_dim: 4,
        output_dim: 2,
        layer_widths: [8, 8, 8, 4],
        leaky_slope: 0.1,
        dropout_ps: [0.2, 0.2, 0.2, 0.3],
        seed,
    }
}

/// Reduced encoder: d=8, 1 layer, 2 heads.
pub fn small_enc_cfg(seed: u64) -> EncoderConfig {
    EncoderConfig {
        embed_dim: 8,
        num_layers: 1,
        num_heads: 2,
        ffn_dim: 16,
        max_len: 16,
        seed,
    }
}

pub fn random_batch(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.random::<f64>() * 2.0 - 1.0)
}

pub fn probe_domains() -> Vec<DomainName> {
    [
        "example",
        "amp1e",
        "b@nk",
        "login-check",
        "zzz",
        "update7",
        "short",
        "qx-test",
    ]
    .iter()
    .map(|s| dn(s))
    .collect()
}

/// Worst relative error observed for one tensor.
#[derive(Debug)]
pub struct FdReport {
    pub tensor: String,
    pub max_err: f64,
    pub checked: usize,
}

/// Central-difference gradient check.
///
/// For each tensor (subsampled past `max_per_tensor` elements), perturbs a
/// clone of `model` by ±eps and compares `(f(+)-f(-))/2eps` against the
/// analytic gradient. The error metric is relative with an absolute floor
/// so exactly-zero gradients do not divide by FD noise.
#[allow(clippy::too_many_arguments)]
pub fn check_gradients<M: Clone>(
    model: &M,
    loss_fn: &dyn Fn(&mut M) -> f64,
    params_fn: &dyn Fn(&mut M) -> Vec<ArrayViewMutD<'_, f64>>,
    names: &[&str],
    analytic: &[ArrayD<f64>],
    eps: f64,
    max_per_tensor: usize,
    seed: u64,
) -> Vec<FdReport> {
    let n_tensors = {
        let mut probe = model.clone();
        params_fn(&mut probe).len()
    };
    assert_eq!(n_tensors, analytic.len(), "analytic gradient count");
    assert_eq!(n_tensors, names.len(), "tensor name count");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::with_capacity(n_tensors);
    for t in 0..n_tensors {
        let numel = analytic[t].len();
        let mut indices: Vec<usize> = if numel <= max_per_tensor {
            (0..numel).collect()
        } else {
            let mut set = std::collections::BTreeSet::new();
            // always include the strongest analytic entry
            let (argmax, _) = analytic[t]
                .iter()
                .enumerate()
                .fold((0, 0.0_f64), |acc, (i, &v)| {
                    if v.abs() > acc.1 {
                        (i, v.abs())
                    } else {
                        acc
                    }
                });
            set.insert(argmax);
            while set.len() < max_per_tensor {
                set.insert(rng.random_range(0..numel));
            }
            set.into_iter().collect()
        };
        indices.sort_unstable();
        let mut max_err = 0.0_f64;
        for &flat in &indices {
            let mut plus = model.clone();
            {
                let mut params = params_fn(&mut plus);
                *params[t].iter_mut().nth(flat).unwrap() += eps;
            }
            let f_plus = loss_fn(&mut plus);
            let mut minus = model.clone();
            {
                let mut params = params_fn(&mut minus);
                *params[t].iter_mut().nth(flat).unwrap() -= eps;
            }
            let f_minus = loss_fn(&mut minus);
            let numeric = (f_plus - f_minus) / (2.0 * eps);
            let a = *analytic[t].iter().nth(flat).unwrap();
            let abs_diff = (a - numeric).abs();
            let err = if abs_diff <= 1e-7 {
                0.0
            } else {
                abs_diff / a.abs().max(numeric.abs()).max(1e-7)
            };
            if err > max_err {
                max_err = err;
            }
        }
        reports.push(FdReport {
            tensor: names[t].to_string(),
            max_err,
            checked: indices.len(),
        });
    }
    reports
}

pub fn mlp_learnable_names() -> Vec<&'static str> {
    vec![
        "fc1.w",
        "fc1.b",
        "bn1.gamma",
        "bn1.beta",
        "fc2.w",
        "fc2.b",
        "bn2.gamma",
        "bn2.beta",
        "fc3.w",
        "fc3.b",
        "bn3.gamma",
        "bn3.beta",
        "fc4.w",
        "fc4.b",
        "bn4.gamma",
        "bn4.beta",
        "fc5.w",
        "fc5.b",
    ]
}

pub fn enc_learnable_names(layers: usize) -> Vec<String> {
    let mut v = vec!["embed".to_string()];
    for i in 0..layers {
        for t in [
            "ln1.gamma",
            "ln1.beta",
            "wq",
            "bq",
            "wk",
            "bk",
            "wv",
            "bv",
            "wo",
            "bo",
            "ln2.gamma",
            "ln2.beta",
            "w1",
            "b1",
            "w2",
            "b2",
        ] {
            v.push(format!("layer{i}.{t}"));
        }
    }
    v.push("final_ln.gamma".into());
    v.push("final_ln.beta".into());
    v
}

// ---------------------------------------------------------------------
// Brute-force matcher oracles
// ---------------------------------------------------------------------

pub const ALPHABET8: [char; 8] = ['a', 'b', 'c', 'd', 'e', 'f', 'g', 'h'];

/// Brute force: longest block by descending length, then smallest a_start,
/// then smallest b_start.
pub fn oracle_longest(a: &[char], b: &[char]) -> (usize, usize, usize) {
    for len in (1..=a.len().min(b.len())).rev() {
        for a_start in 0..=a.len() - len {
            for b_start in 0..=b.len() - len {
                if a[a_start..a_start + len] == b[b_start..b_start + len] {
                    return (a_start, b_start, len);
                }
            }
        }
    }
    (0, 0, 0)
}

fn oracle_total_ordered(a: &[char], b: &[char]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let (a_start, b_start, len) = oracle_longest(a, b);
    if len == 0 {
        return 0;
    }
    len + oracle_total_ordered(&a[..a_start], &b[..b_start])
        + oracle_total_ordered(&a[a_start + len..], &b[b_start + len..])
}

/// Independent recursive oracle over the same canonical argument order as
/// the implementation: shorter first, ties by lexicographic comparison.
pub fn oracle_total(a: &[char], b: &[char]) -> usize {
    if a.len() < b.len() || (a.len() == b.len() && a <= b) {
        oracle_total_ordered(a, b)
    } else {
        oracle_total_ordered(b, a)
    }
}

pub fn random_string(rng: &mut ChaCha8Rng, max_len: usize, alphabet: &[char]) -> String {
    let len = rng.random_range(0..=max_len);
    (0..len)
        .map(|_| alphabet[rng.random_range(0..alphabet.len())])
        .collect()
}

// ---------------------------------------------------------------------
// Minimal HTTP client for exercising the scoring service
// ---------------------------------------------------------------------

pub fn http_request(
    addr: std::net::SocketAddr,
    method: &str,
    path: &str,
    body: &str,
) -> (u16, String) {
    use std::io::{Read, Write};
    let mut stream = std::net::TcpStream::connect(addr).unwrap();
    let req = format!(
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nContent-Type: application/json\r\n\
         Content-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(req.as_bytes()).unwrap();
    let mut raw = String::new();
    stream.read_to_string(&mut raw).unwrap();
    let status: u16 = raw
        .split_whitespace()
        .nth(1)
        .expect("status line")
        .parse()
        .expect("numeric status");
    let body = raw
        .split_once("\r\n\r\n")
        .map(|(_, b)| b.to_string())
        .unwrap_or_default();
    (status, body)
}

/// All three trainable parts of the fused path bundled for cloning.
#[derive(Clone)]
pub struct FusedParts {
    pub mlp: MlpWeights,
    pub enc: EncoderWeights,
    pub head: FusionHead,
}

impl FusedParts {
    pub fn new(seed: u64) -> Self {
        let mlp = MlpWeights::init(small_mlp_cfg(seed)).unwrap();
        let enc = EncoderWeights::init(small_enc_cfg(seed + 1)).unwrap();
        let head = FusionHead::init(8 + 4, seed + 2);
        FusedParts { mlp, enc, head }
    }

    pub fn params_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        let mut v = self.mlp.learnable_views_mut();
        v.extend(self.enc.learnable_views_mut());
        v.extend(self.head.learnable_views_mut());
        v
    }

    pub fn names(&self) -> Vec<String> {
        let mut v: Vec<String> = mlp_learnable_names()
            .into_iter()
            .map(|s| format!("mlp.{s}"))
            .collect();
        v.extend(
            enc_learnable_names(self.enc.cfg.num_layers)
                .into_iter()
                .map(|s| format!("enc.{s}")),
        );
        v.push("head.w".into());
        v.push("head.b".into());
        v
    }

    /// Train-mode fused forward with fixed dropout seed; returns the
    /// cross-entropy loss.
    pub fn loss(
        &mut self,
        x: &Array2<f64>,
        domains: &[DomainName],
        labels: &[u8],
        dropout_seed: u64,
    ) -> f64 {
        let acts = self.mlp.forward_train(x, dropout_seed).unwrap();
        let out = self.enc.encode_train(domains).unwrap();
        let fused = concat_embeddings(&out.pooled, &acts.embedding).unwrap();
        let logits = self.head.forward(&fused).unwrap();
        cross_entropy(&logits, labels).0
    }

    /// Analytic gradients for the same fused loss, in `params_mut` order.
    pub fn analytic(
        &self,
        x: &Array2<f64>,
        domains: &[DomainName],
        labels: &[u8],
        dropout_seed: u64,
    ) -> Vec<ArrayD<f64>> {
        let mut work = self.clone();
        let acts = work.mlp.forward_train(x, dropout_seed).unwrap();
        let out = work.enc.encode_train(domains).unwrap();
        let fused = concat_embeddings(&out.pooled, &acts.embedding).unwrap();
        let logits = work.head.forward(&fused).unwrap();
        let (_, d_logits) = cross_entropy(&logits, labels);
        let (dw, db, d_fused) = work.head.backward(&fused, &d_logits);
        let d_text = d_fused
            .slice(ndarray::s![.., ..out.pooled.ncols()])
            .to_owned();
        let d_num = d_fused
            .slice(ndarray::s![.., out.pooled.ncols()..])
            .to_owned();
        let mlp_grads = work
            .mlp
            .backward(
                &acts,
                &MlpUpstream {
                    d_logits: None,
                    d_embedding: Some(d_num),
                },
            )
            .unwrap();
        let enc_grads = work.enc.backward(&out, &d_text).unwrap();
        let mut v: Vec<ArrayD<f64>> = mlp_grads.views().iter().map(|g| g.to_owned()).collect();
        v.extend(enc_grads.views().iter().map(|g| g.to_owned()));
        v.push(dw.into_dyn());
        v.push(db.into_dyn());
        v
    }
}

// ---------------------------------------------------------------------
// Gradient-check cases shared by the detailed suite and the acceptance
// suite
// ---------------------------------------------------------------------

pub const FD_EPS: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;

pub fn assert_fd_reports(case: &str, reports: &[FdReport]) {
    for r in reports {
        assert!(
            r.max_err < FD_TOL,
            "{case}: tensor {} failed, max rel err {:.3e} over {} elements",
            r.tensor,
            r.max_err,
            r.checked
        );
    }
}

pub fn worst_err(reports: &[FdReport]) -> f64 {
    reports.iter().fold(0.0, |acc, r| acc.max(r.max_err))
}

pub fn grad_case_mlp_logits() -> Vec<FdReport> {
    let model = MlpWeights::init(small_mlp_cfg(41)).unwrap();
    let x = random_batch(4, 4, 7);
    let labels = vec![0u8, 1, 1, 0];
    let dropout_seed = 99;
    let loss = {
        let x = x.clone();
        let labels = labels.clone();
        move |m: &mut MlpWeights| {
            let acts = m.forward_train(&x, dropout_seed).unwrap();
            cross_entropy(&acts.logits, &labels).0
        }
    };
    let analytic: Vec<ArrayD<f64>> = {
        let mut work = model.clone();
        let acts = work.forward_train(&x, dropout_seed).unwrap();
        let (_, d_logits) = cross_entropy(&acts.logits, &labels);
        let grads = work
            .backward(
                &acts,
                &MlpUpstream {
                    d_logits: Some(d_logits),
                    d_embedding: None,
                },
            )
            .unwrap();
        grads.views().iter().map(|g| g.to_owned()).collect()
    };
    check_gradients(
        &model,
        &loss,
        &|m| m.learnable_views_mut(),
        &mlp_learnable_names(),
        &analytic,
        FD_EPS,
        usize::MAX,
        11,
    )
}

pub fn grad_case_mlp_dual() -> Vec<FdReport> {
    let model = MlpWeights::init(small_mlp_cfg(43)).unwrap();
    let x = random_batch(4, 4, 17);
    let labels = vec![1u8, 0, 1, 0];
    let probe = random_batch(4, 4, 23);
    let dropout_seed = 4242;
    let loss = {
        let x = x.clone();
        let labels = labels.clone();
        let probe = probe.clone();
        move |m: &mut MlpWeights| {
            let acts = m.forward_train(&x, dropout_seed).unwrap();
            let ce = cross_entropy(&acts.logits, &labels).0;
            ce + (&acts.embedding * &probe).sum()
        }
    };
    let analytic: Vec<ArrayD<f64>> = {
        let mut work = model.clone();
        let acts = work.forward_train(&x, dropout_seed).unwrap();
        let (_, d_logits) = cross_entropy(&acts.logits, &labels);
        let grads = work
            .backward(
                &acts,
                &MlpUpstream {
                    d_logits: Some(d_logits),
                    d_embedding: Some(probe.clone()),
                },
            )
            .unwrap();
        grads.views().iter().map(|g| g.to_owned()).collect()
    };
    check_gradients(
        &model,
        &loss,
        &|m| m.learnable_views_mut(),
        &mlp_learnable_names(),
        &analytic,
        FD_EPS,
        usize::MAX,
        13,
    )
}

pub fn grad_case_encoder() -> Vec<FdReport> {
    let model = EncoderWeights::init(small_enc_cfg(51)).unwrap();
    let domains = probe_domains();
    let probe = random_batch(domains.len(), 8, 29);
    let loss = {
        let domains = domains.clone();
        let probe = probe.clone();
        move |m: &mut EncoderWeights| {
            let out = m.encode_train(&domains).unwrap();
            (&out.pooled * &probe).sum()
        }
    };
    let analytic: Vec<ArrayD<f64>> = {
        let out = model.encode_train(&domains).unwrap();
        let grads = model.backward(&out, &probe).unwrap();
        grads.views().iter().map(|g| g.to_owned()).collect()
    };
    let names = enc_learnable_names(1);
    let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    check_gradients(
        &model,
        &loss,
        &|m| m.learnable_views_mut(),
        &name_refs,
        &analytic,
        FD_EPS,
        400,
        17,
    )
}

pub fn grad_case_head() -> Vec<FdReport> {
    let head = FusionHead::init(8 + 4, 61);
    let x = random_batch(4, 12, 31);
    let labels = vec![0u8, 1, 0, 1];
    let loss = {
        let x = x.clone();
        let labels = labels.clone();
        move |h: &mut FusionHead| {
            let logits = h.forward(&x).unwrap();
            cross_entropy(&logits, &labels).0
        }
    };
    let analytic: Vec<ArrayD<f64>> = {
        let logits = head.forward(&x).unwrap();
        let (_, d_logits) = cross_entropy(&logits, &labels);
        let (dw, db, _) = head.backward(&x, &d_logits);
        vec![dw.into_dyn(), db.into_dyn()]
    };
    check_gradients(
        &head,
        &loss,
        &|h| h.learnable_views_mut(),
        &["head.w", "head.b"],
        &analytic,
        FD_EPS,
        usize::MAX,
        19,
    )
}

pub fn grad_case_fused() -> Vec<FdReport> {
    let parts = FusedParts::new(71);
    let domains = probe_domains();
    let x = random_batch(domains.len(), 4, 37);
    let labels = vec![0u8, 1, 1, 0, 1, 0, 0, 1];
    let dropout_seed = 555;
    let loss = {
        let x = x.clone();
        let domains = domains.clone();
        let labels = labels.clone();
        move |p: &mut FusedParts| p.loss(&x, &domains, &labels, dropout_seed)
    };
    let analytic = parts.analytic(&x, &domains, &labels, dropout_seed);
    let names = parts.names();
    let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    check_gradients(
        &parts,
        &loss,
        &|p| p.params_mut(),
        &name_refs,
        &analytic,
        FD_EPS,
        300,
        23,
    )
}
