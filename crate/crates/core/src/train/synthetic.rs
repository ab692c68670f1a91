//! Seeded synthetic dataset generators used by the evaluation and test
//! suites.
//!
//! Two constructions:
//! - a numerically separable set, where the label is a function of two
//!   numeric features (digit count and length), learnable by the MLP
//!   branch alone;
//! - a text-pattern set, where the label depends on a character substring
//!   and the numeric features carry no class signal, so only the text
//!   branch can help.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DataRow, Dataset};
use crate::domain::{extract_features, DomainName};

fn random_letters(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len)
        .map(|_| char::from(b'a' + rng.random_range(0..26u8)))
        .collect()
}

fn push_unique(
    rows: &mut Vec<DataRow>,
    seen: &mut HashSet<String>,
    text: String,
    similarity: f64,
    label: u8,
) -> bool {
    if !seen.insert(text.clone()) {
        return false;
    }
    let domain = DomainName::normalize(&text, false).expect("generated names are valid");
    let features = extract_features(&domain, similarity);
    rows.push(DataRow {
        domain,
        features,
        label,
    });
    true
}

/// Labels are a function of two numeric features: malicious iff the name
/// contains at least one digit AND is longer than 20 scalars. The
/// similarity feature is independent uniform noise.
pub fn separable_numeric(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut seen = HashSet::new();
    while rows.len() < n {
        let malicious = rng.random_range(0..2u8) == 1;
        let text = if malicious {
            // long, with 1..4 digits mixed in
            let len = rng.random_range(21..=32usize);
            let digits = rng.random_range(1..=4usize);
            let mut chars: Vec<char> = random_letters(&mut rng, len).chars().collect();
            for _ in 0..digits {
                let pos = rng.random_range(0..len);
                chars[pos] = char::from(b'0' + rng.random_range(0..10u8));
            }
            chars.into_iter().collect()
        } else {
            // benign: break at least one of the two conditions
            match rng.random_range(0..3u8) {
                0 => {
                    // short, with digits
                    let len = rng.random_range(5..=20usize);
                    let mut chars: Vec<char> = random_letters(&mut rng, len).chars().collect();
                    let pos = rng.random_range(0..len);
                    chars[pos] = char::from(b'0' + rng.random_range(0..10u8));
                    chars.into_iter().collect()
                }
                1 => {
                    let len = rng.random_range(5..=20usize);
                    random_letters(&mut rng, len)
                }
                _ => {
                    let len = rng.random_range(21..=32usize);
                    random_letters(&mut rng, len)
                }
            }
        };
        let similarity = rng.random::<f64>();
        push_unique(&mut rows, &mut seen, text, similarity, malicious as u8);
    }
    Dataset {
        rows,
        feature_stats: None,
    }
}

/// The substring the text-pattern generator plants in malicious names.
pub const TEXT_PATTERN: &str = "xq";

/// Labels depend only on the presence of [`TEXT_PATTERN`]: lengths are
/// drawn from the same distribution for both classes, names are
/// letters-only (zero digit/special counts), and the similarity feature is
/// independent uniform noise.
pub fn text_pattern(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut seen = HashSet::new();
    while rows.len() < n {
        let malicious = rng.random_range(0..2u8) == 1;
        let len = rng.random_range(10..=16usize);
        let text = if malicious {
            let mut chars: Vec<char> = random_letters(&mut rng, len).chars().collect();
            let pos = rng.random_range(0..len - 1);
            chars[pos] = 'x';
            chars[pos + 1] = 'q';
            chars.into_iter().collect::<String>()
        } else {
            loop {
                let s = random_letters(&mut rng, len);
                if !s.contains(TEXT_PATTERN) {
                    break s;
                }
            }
        };
        let similarity = rng.random::<f64>();
        push_unique(&mut rows, &mut seen, text, similarity, malicious as u8);
    }
    Dataset {
        rows,
        feature_stats: None,
    }
}

/// Random letter-digit registrant names for index stress tests.
pub fn random_registrants(n: usize, seed: u64) -> Vec<DomainName> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let len = rng.random_range(4..=20usize);
        let s: String = (0..len)
            .map(|_| {
                if rng.random_range(0..8u8) == 0 {
                    char::from(b'0' + rng.random_range(0..10u8))
                } else {
                    char::from(b'a' + rng.random_range(0..26u8))
                }
            })
            .collect();
        if seen.insert(s.clone()) {
            out.push(DomainName::normalize(&s, false).unwrap());
        }
    }
    out
}
