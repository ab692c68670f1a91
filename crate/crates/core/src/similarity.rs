//! Gestalt (Ratcliff–Obershelp) sequence matching and exact pruned top-1
//! similarity search over a registrant database.
//!
//! The matcher finds the longest common contiguous block, then recurses on
//! the unmatched left/right remainders; the total matched character count M
//! drives two ratio modes:
//!
//! - [`RatioMode::Paper`]: `M / max(|a|, |b|)` — the ratio the worked
//!   similarity example computes (5/7 for "example" vs "ample").
//! - [`RatioMode::Symmetric`]: `2M / (|a| + |b|)` — the classical gestalt
//!   ratio.
//!
//! All positions and lengths are in Unicode scalar values.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::DomainName;
use crate::error::{Error, Result};

/// A maximal common contiguous block between two sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchBlock {
    pub a_start: usize,
    pub b_start: usize,
    pub len: usize,
}

/// Which similarity ratio to compute from the matched total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RatioMode {
    /// `M / max(|a|, |b|)`.
    Paper,
    /// `2M / (|a| + |b|)`.
    Symmetric,
}

impl RatioMode {
    /// Score as an exact rational `(numerator, denominator)`.
    fn rational(&self, matched: usize, len_a: usize, len_b: usize) -> (u64, u64) {
        match self {
            RatioMode::Paper => (matched as u64, len_a.max(len_b) as u64),
            RatioMode::Symmetric => (2 * matched as u64, (len_a + len_b) as u64),
        }
    }
}

impl std::fmt::Display for RatioMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RatioMode::Paper => f.write_str("paper"),
            RatioMode::Symmetric => f.write_str("symmetric"),
        }
    }
}

impl std::str::FromStr for RatioMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "paper" => Ok(RatioMode::Paper),
            "symmetric" => Ok(RatioMode::Symmetric),
            other => Err(format!("unknown ratio mode {other:?} (paper|symmetric)")),
        }
    }
}

/// Find the longest common contiguous block of `a` and `b`.
///
/// Among equal-length blocks, the one with the smallest `a_start` wins,
/// then the smallest `b_start`. Returns a zero-length block at (0,0) when
/// the inputs share no scalar.
pub fn longest_match(a: &str, b: &str) -> MatchBlock {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    longest_match_chars(&a, &b)
}

fn longest_match_chars(a: &[char], b: &[char]) -> MatchBlock {
    let mut best = MatchBlock {
        a_start: 0,
        b_start: 0,
        len: 0,
    };
    if a.is_empty() || b.is_empty() {
        return best;
    }
    // Rolling DP over run lengths ending at (i, j). Strict `>` keeps the
    // first maximal block in (row, column) order, which is exactly the
    // smallest-a_start-then-smallest-b_start tie-break.
    let mut prev = vec![0usize; b.len()];
    let mut cur = vec![0usize; b.len()];
    for (i, &ca) in a.iter().enumerate() {
        for (j, &cb) in b.iter().enumerate() {
            cur[j] = if ca == cb {
                if i > 0 && j > 0 {
                    prev[j - 1] + 1
                } else {
                    1
                }
            } else {
                0
            };
            if cur[j] > best.len {
                best = MatchBlock {
                    a_start: i + 1 - cur[j],
                    b_start: j + 1 - cur[j],
                    len: cur[j],
                };
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

/// Total matched characters M of the gestalt recursion: the longest common
/// block plus, recursively, the matches in the left and right remainders.
///
/// The recursion's tie-breaks make raw argument order matter, so M is
/// evaluated over a canonical order (shorter sequence first, ties by
/// lexicographic comparison). That makes the result symmetric without
/// touching the worked-example values.
pub fn total_matches(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    total_matches_canonical(&a, &b)
}

fn canonical_order<'a>(a: &'a [char], b: &'a [char]) -> (&'a [char], &'a [char]) {
    if a.len() != b.len() {
        if a.len() < b.len() {
            (a, b)
        } else {
            (b, a)
        }
    } else if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn total_matches_canonical(a: &[char], b: &[char]) -> usize {
    let (x, y) = canonical_order(a, b);
    total_matches_chars(x, y)
}

fn total_matches_chars(a: &[char], b: &[char]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let blk = longest_match_chars(a, b);
    if blk.len == 0 {
        return 0;
    }
    blk.len
        + total_matches_chars(&a[..blk.a_start], &b[..blk.b_start])
        + total_matches_chars(&a[blk.a_start + blk.len..], &b[blk.b_start + blk.len..])
}

/// `M / max(|a|, |b|)`. 1.0 when both inputs are empty, 0.0 when exactly
/// one is.
pub fn paper_ratio(a: &str, b: &str) -> f64 {
    let la = a.chars().count();
    let lb = b.chars().count();
    if la == 0 && lb == 0 {
        return 1.0;
    }
    if la == 0 || lb == 0 {
        return 0.0;
    }
    total_matches(a, b) as f64 / la.max(lb) as f64
}

/// The classical gestalt ratio `2M / (|a| + |b|)`. 1.0 when both inputs
/// are empty.
pub fn symmetric_ratio(a: &str, b: &str) -> f64 {
    let la = a.chars().count();
    let lb = b.chars().count();
    if la + lb == 0 {
        return 1.0;
    }
    2.0 * total_matches(a, b) as f64 / (la + lb) as f64
}

/// Outcome of a top-1 similarity search.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityResult {
    pub score: f64,
    /// `None` iff the index is empty.
    pub matched_registrant: Option<DomainName>,
    pub total_matched: usize,
}

/// Scan accounting for one `best_match` call.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScanStats {
    /// Entries in the index.
    pub candidates: usize,
    /// Entries for which the full match count was actually computed.
    pub scored: usize,
}

const FREQ_SLOTS: usize = 38;

/// 26 letters a-z, 10 digits, hyphen, and one shared "other" slot. Sharing
/// a slot only loosens the bound; it never undercounts.
fn freq_slot(c: char) -> usize {
    match c {
        'a'..='z' => c as usize - 'a' as usize,
        '0'..='9' => 26 + c as usize - '0' as usize,
        '-' => 36,
        _ => 37,
    }
}

fn char_freq(chars: &[char]) -> [u32; FREQ_SLOTS] {
    let mut f = [0u32; FREQ_SLOTS];
    for &c in chars {
        f[freq_slot(c)] += 1;
    }
    f
}

struct Entry {
    name: DomainName,
    chars: Vec<char>,
    freq: [u32; FREQ_SLOTS],
}

/// Length-banded, frequency-summarized index over the registrant database.
///
/// Immutable after build; concurrent queries need no coordination. Queries
/// return exactly what an exhaustive scan returns — the bands and frequency
/// summaries are pruning devices, not approximations.
pub struct RegistrantIndex {
    /// Sorted by (char length, text); each band is a contiguous range.
    entries: Vec<Entry>,
    bands: BTreeMap<usize, Range<usize>>,
}

impl RegistrantIndex {
    /// Build from normalized registrant names. Duplicates are dropped.
    pub fn build(registrants: Vec<DomainName>) -> Self {
        let mut names = registrants;
        names.sort_unstable_by(|a, b| {
            a.char_len()
                .cmp(&b.char_len())
                .then_with(|| a.as_str().cmp(b.as_str()))
        });
        names.dedup();
        let entries: Vec<Entry> = names
            .into_iter()
            .map(|name| {
                let chars: Vec<char> = name.as_str().chars().collect();
                let freq = char_freq(&chars);
                Entry { name, chars, freq }
            })
            .collect();
        let mut bands: BTreeMap<usize, Range<usize>> = BTreeMap::new();
        let mut start = 0;
        while start < entries.len() {
            let len = entries[start].chars.len();
            let mut end = start + 1;
            while end < entries.len() && entries[end].chars.len() == len {
                end += 1;
            }
            bands.insert(len, start..end);
            start = end;
        }
        RegistrantIndex { entries, bands }
    }

    /// Load a registrant database file: UTF-8, one domain per line,
    /// '#'-prefixed comment lines ignored, each line normalized on load.
    pub fn from_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut names = Vec::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let name = DomainName::normalize(trimmed, false).map_err(|e| Error::Parse {
                line: idx + 1,
                msg: e.to_string(),
            })?;
            names.push(name);
        }
        Ok(Self::build(names))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Exact membership test (used by dataset ingestion to drop rows already
    /// present in the registrant database).
    pub fn contains(&self, d: &DomainName) -> bool {
        let Some(range) = self.bands.get(&d.char_len()) else {
            return false;
        };
        self.entries[range.clone()]
            .binary_search_by(|e| e.name.as_str().cmp(d.as_str()))
            .is_ok()
    }

    /// Iterate entry names in index order (ascending length, then text).
    pub fn iter_names(&self) -> impl Iterator<Item = &DomainName> {
        self.entries.iter().map(|e| &e.name)
    }

    /// Top-1 search: the registrant maximizing the selected ratio, ties
    /// broken by lexicographically smallest registrant text.
    pub fn best_match(&self, query: &DomainName, mode: RatioMode) -> SimilarityResult {
        self.best_match_with_stats(query, mode).0
    }

    /// `best_match` plus scan accounting, exposed so pruning effectiveness
    /// is measurable.
    pub fn best_match_with_stats(
        &self,
        query: &DomainName,
        mode: RatioMode,
    ) -> (SimilarityResult, ScanStats) {
        let mut stats = ScanStats {
            candidates: self.entries.len(),
            scored: 0,
        };
        if self.entries.is_empty() {
            return (
                SimilarityResult {
                    score: 0.0,
                    matched_registrant: None,
                    total_matched: 0,
                },
                stats,
            );
        }
        let q_chars: Vec<char> = query.as_str().chars().collect();
        let q_freq = char_freq(&q_chars);
        let lq = q_chars.len();

        // Visit bands in decreasing order of their length-only score bound so
        // the running best rises early and far bands can be cut off wholesale.
        let mut band_order: Vec<(usize, &Range<usize>)> =
            self.bands.iter().map(|(l, r)| (*l, r)).collect();
        band_order.sort_by(|(l1, _), (l2, _)| {
            let b1 = mode.rational((*l1).min(lq), *l1, lq);
            let b2 = mode.rational((*l2).min(lq), *l2, lq);
            cmp_rational(b2, b1).then(l1.cmp(l2))
        });

        // best = (num, den, entry index); rational compare keeps the scan
        // exact, no float rounding in the argmax.
        let mut best: Option<(u64, u64, usize)> = None;
        for (band_len, range) in band_order {
            let band_bound = mode.rational(band_len.min(lq), band_len, lq);
            if let Some((bn, bd, _)) = best {
                // Bands are sorted by bound; strictly worse means every
                // remaining band is too.
                if cmp_rational(band_bound, (bn, bd)).is_lt() {
                    break;
                }
            }
            for idx in range.clone() {
                let entry = &self.entries[idx];
                let freq_bound: u32 = entry
                    .freq
                    .iter()
                    .zip(q_freq.iter())
                    .map(|(a, b)| a.min(b))
                    .sum();
                let ub = mode.rational(freq_bound as usize, entry.chars.len(), lq);
                if let Some((bn, bd, bi)) = best {
                    match cmp_rational(ub, (bn, bd)) {
                        std::cmp::Ordering::Less => continue,
                        std::cmp::Ordering::Equal => {
                            // At best a tie; only a lexicographically
                            // smaller name could displace the winner.
                            if entry.name.as_str() >= self.entries[bi].name.as_str() {
                                continue;
                            }
                        }
                        std::cmp::Ordering::Greater => {}
                    }
                }
                let m = total_matches_canonical(&q_chars, &entry.chars);
                stats.scored += 1;
                let score = mode.rational(m, lq, entry.chars.len());
                let better = match best {
                    None => true,
                    Some((bn, bd, bi)) => match cmp_rational(score, (bn, bd)) {
                        std::cmp::Ordering::Greater => true,
                        std::cmp::Ordering::Equal => {
                            entry.name.as_str() < self.entries[bi].name.as_str()
                        }
                        std::cmp::Ordering::Less => false,
                    },
                };
                if better {
                    best = Some((score.0, score.1, idx));
                }
            }
        }
        let (num, den, idx) = best.expect("non-empty index always yields a winner");
        let entry = &self.entries[idx];
        let matched = match mode {
            RatioMode::Paper => num as usize,
            RatioMode::Symmetric => num as usize / 2,
        };
        (
            SimilarityResult {
                score: num as f64 / den as f64,
                matched_registrant: Some(entry.name.clone()),
                total_matched: matched,
            },
            stats,
        )
    }

    /// Reference scan: scores every entry, no pruning. `best_match` must
    /// agree with this bit for bit; it exists as the verification baseline.
    pub fn exhaustive_best_match(&self, query: &DomainName, mode: RatioMode) -> SimilarityResult {
        if self.entries.is_empty() {
            return SimilarityResult {
                score: 0.0,
                matched_registrant: None,
                total_matched: 0,
            };
        }
        let q_chars: Vec<char> = query.as_str().chars().collect();
        let lq = q_chars.len();
        let mut best: Option<(u64, u64, usize)> = None;
        for (idx, entry) in self.entries.iter().enumerate() {
            let m = total_matches_canonical(&q_chars, &entry.chars);
            let score = mode.rational(m, lq, entry.chars.len());
            let better = match best {
                None => true,
                Some((bn, bd, bi)) => match cmp_rational(score, (bn, bd)) {
                    std::cmp::Ordering::Greater => true,
                    std::cmp::Ordering::Equal => {
                        entry.name.as_str() < self.entries[bi].name.as_str()
                    }
                    std::cmp::Ordering::Less => false,
                },
            };
            if better {
                best = Some((score.0, score.1, idx));
            }
        }
        let (num, den, idx) = best.unwrap();
        let entry = &self.entries[idx];
        let matched = match mode {
            RatioMode::Paper => num as usize,
            RatioMode::Symmetric => num as usize / 2,
        };
        SimilarityResult {
            score: num as f64 / den as f64,
            matched_registrant: Some(entry.name.clone()),
            total_matched: matched,
        }
    }
}

fn cmp_rational((n1, d1): (u64, u64), (n2, d2): (u64, u64)) -> std::cmp::Ordering {
    (n1 as u128 * d2 as u128).cmp(&(n2 as u128 * d1 as u128))
}
