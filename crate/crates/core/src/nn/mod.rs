//! From-scratch neural components: the numeric-feature MLP, the
//! character-level text encoder, the fusion head, and the Adam optimizer.
//!
//! Everything runs in `f64` so the finite-difference gradient checks probe
//! the exact code path training uses. Eval-mode forwards are pure; train
//! state (batch-norm running stats) is mutated only by an owning training
//! loop.

pub mod adam;
pub mod encoder;
pub mod fusion;
pub mod mlp;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use adam::Adam;
pub use encoder::{EncodeOutput, EncoderConfig, EncoderGradients, EncoderWeights};
pub use fusion::{cross_entropy, fuse_forward, FusionHead, FusionModel, Label, ModelMode, Verdict};
pub use mlp::{MlpActivations, MlpConfig, MlpGradients, MlpUpstream, MlpWeights};

/// Glorot-style uniform init: zero-mean, scale `sqrt(6 / (fan_in + fan_out))`.
pub(crate) fn glorot_uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let scale = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| (2.0 * rng.random::<f64>() - 1.0) * scale)
}

pub(crate) fn zeros1(n: usize) -> Array1<f64> {
    Array1::zeros(n)
}

/// Derive a per-purpose stream seed from a base seed and a salt.
pub(crate) fn derive_seed(base: u64, salt: u64) -> u64 {
    base.wrapping_add(salt.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}
