//! Registration-time domain risk scoring.
//!
//! The pipeline takes a newly registered domain name, enriches it with
//! numeric features (length, digit count, special-character count) and a
//! similarity score against a registrant database, then classifies it
//! benign/suspicious with a two-branch model: a character-level text
//! encoder over the raw name and an MLP over the numeric features, fused
//! through a shared embedding into a linear classifier.

pub mod bundle;
pub mod domain;
pub mod error;
pub mod nn;
pub mod service;
pub mod similarity;
pub mod train;

pub use domain::{classify_char, extract_features, CharClass, DomainName, FeatureRow};
pub use error::{Error, Result};
pub use similarity::{
    longest_match, paper_ratio, symmetric_ratio, total_matches, MatchBlock, RatioMode,
    RegistrantIndex, SimilarityResult,
};
