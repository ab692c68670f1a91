//! Domain name normalization and the common numeric features.
//!
//! A [`DomainName`] is the unit of scoring: lowercase, whitespace-trimmed,
//! usually TLD-less (registrant databases and datasets ship without TLDs).
//! Lengths and counts are in Unicode scalar values, not bytes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A normalized registration-time domain name (no TLD label).
///
/// Invariants: non-empty, no uppercase scalars, no surrounding ASCII
/// whitespace, no control characters. Construct via [`DomainName::normalize`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DomainName(String);

impl DomainName {
    /// Normalize a raw registration string into a `DomainName`.
    ///
    /// Trims ASCII whitespace and lowercases. With `strip_tld`, the final
    /// '.'-separated label is removed when at least one '.' is present
    /// (datasets that still carry TLDs are stripped on ingest; stored
    /// registrant databases are already TLD-less, so the flag defaults to
    /// off at every call site).
    pub fn normalize(raw: &str, strip_tld: bool) -> Result<Self> {
        let trimmed = raw.trim_matches(|c: char| c.is_ascii_whitespace());
        if trimmed.chars().any(|c| c.is_control()) {
            return Err(Error::InvalidDomain(trimmed.to_string()));
        }
        let mut text = trimmed.to_lowercase();
        if strip_tld && text.contains('.') {
            let labels: Vec<&str> = text.split('.').collect();
            text = labels[..labels.len() - 1].join(".");
        }
        if text.is_empty() {
            return Err(Error::EmptyDomain);
        }
        Ok(DomainName(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Length in Unicode scalar values.
    pub fn char_len(&self) -> usize {
        self.0.chars().count()
    }
}

impl std::fmt::Display for DomainName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Character class used by the feature counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CharClass {
    Letter,
    Digit,
    Special,
}

/// Classify one scalar value. Digits are ASCII `0-9`; letters are Unicode
/// letters; everything else (hyphen, '@', '_', '.', ...) is special.
pub fn classify_char(c: char) -> CharClass {
    if c.is_ascii_digit() {
        CharClass::Digit
    } else if c.is_alphabetic() {
        CharClass::Letter
    } else {
        CharClass::Special
    }
}

/// The four numeric features feeding the MLP branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    /// Top-1 similarity against the registrant database, in [0,1].
    pub similarity_score: f64,
    /// Scalar-value count of the domain name.
    pub length: u32,
    pub digit_count: u32,
    pub special_char_count: u32,
}

impl FeatureRow {
    /// Feature vector in column order: similarity, length, digits, specials.
    pub fn as_array(&self) -> [f64; 4] {
        [
            self.similarity_score,
            self.length as f64,
            self.digit_count as f64,
            self.special_char_count as f64,
        ]
    }
}

/// Count the numeric features of a domain and attach a similarity score.
///
/// `similarity` must already be in [0,1]; violations are programmer error.
pub fn extract_features(d: &DomainName, similarity: f64) -> FeatureRow {
    assert!(
        (0.0..=1.0).contains(&similarity),
        "similarity {similarity} out of [0,1]"
    );
    let mut length = 0u32;
    let mut digits = 0u32;
    let mut specials = 0u32;
    for c in d.as_str().chars() {
        length += 1;
        match classify_char(c) {
            CharClass::Digit => digits += 1,
            CharClass::Special => specials += 1,
            CharClass::Letter => {}
        }
    }
    FeatureRow {
        similarity_score: similarity,
        length,
        digit_count: digits,
        special_char_count: specials,
    }
}
