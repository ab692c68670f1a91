//! Dataset ingestion, enrichment, splitting, feature standardization, and
//! the training loop.
//!
//! Dataset CSV: UTF-8, header `domain_name,label`, label in {0,1}. The
//! enriched CSV appends `similarity_score,length,digit_count,
//! special_character_count` in that order.

pub mod metrics;
pub mod synthetic;
mod trainer;

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{extract_features, DomainName, FeatureRow};
use crate::error::{Error, Result};
use crate::similarity::{RatioMode, RegistrantIndex};

pub use metrics::{confusion, metrics_from_confusion, ConfusionCounts, Metrics};
pub use trainer::{evaluate, train, EpochRecord, TrainSetup};

pub const DATASET_HEADER: &str = "domain_name,label";
pub const ENRICHED_HEADER: &str =
    "domain_name,label,similarity_score,length,digit_count,special_character_count";

#[derive(Debug, Clone)]
pub struct DataRow {
    pub domain: DomainName,
    pub features: FeatureRow,
    /// 0 = benign, 1 = malicious.
    pub label: u8,
}

/// Per-feature standardization statistics, computed from the training
/// partition only and reused verbatim at inference time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: [f64; 4],
    pub std: [f64; 4],
}

impl FeatureStats {
    /// No-op scaling.
    pub fn identity() -> Self {
        FeatureStats {
            mean: [0.0; 4],
            std: [1.0; 4],
        }
    }

    /// Population mean/stddev per feature with a 1e-8 stddev floor.
    pub fn from_rows(rows: &[DataRow]) -> Self {
        let n = rows.len().max(1) as f64;
        let mut mean = [0.0; 4];
        for row in rows {
            for (m, v) in mean.iter_mut().zip(row.features.as_array()) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = [0.0; 4];
        for row in rows {
            for ((s, v), m) in var.iter_mut().zip(row.features.as_array()).zip(mean) {
                *s += (v - m) * (v - m);
            }
        }
        let mut std = [0.0; 4];
        for (s, v) in std.iter_mut().zip(var) {
            *s = (v / n).sqrt().max(1e-8);
        }
        FeatureStats { mean, std }
    }

    pub fn apply(&self, f: &FeatureRow) -> [f64; 4] {
        let raw = f.as_array();
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[i] = (raw[i] - self.mean[i]) / self.std[i];
        }
        out
    }
}

/// Training provenance carried inside every model bundle so any verdict can
/// be re-derived.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub hyperparams: Hyperparams,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Epochs without validation-F1 improvement before stopping.
    pub early_stop_patience: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 64,
            max_epochs: 20,
            seed: 0,
            early_stop_patience: 5,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0
            || self.adam_beta1 <= 0.0
            || self.adam_beta2 <= 0.0
            || self.adam_eps <= 0.0
        {
            return Err(Error::InvalidConfig(
                "learning rate and Adam constants must be positive".into(),
            ));
        }
        if self.batch_size < 2 {
            return Err(Error::InvalidConfig(
                "batch_size must be at least 2 (batch-norm statistics)".into(),
            ));
        }
        Ok(())
    }
}

/// A labeled dataset plus (after standardization) the feature statistics
/// used to scale it.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub rows: Vec<DataRow>,
    pub feature_stats: Option<FeatureStats>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Feature matrix, standardized when stats are attached.
    pub fn feature_matrix(&self) -> Array2<f64> {
        let stats = self.feature_stats.unwrap_or_else(FeatureStats::identity);
        let mut m = Array2::zeros((self.rows.len(), 4));
        for (i, row) in self.rows.iter().enumerate() {
            let scaled = stats.apply(&row.features);
            for (j, v) in scaled.into_iter().enumerate() {
                m[[i, j]] = v;
            }
        }
        m
    }

    pub fn labels(&self) -> Vec<u8> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn domains(&self) -> Vec<DomainName> {
        self.rows.iter().map(|r| r.domain.clone()).collect()
    }

    pub fn label_counts(&self) -> (usize, usize) {
        let malicious = self.rows.iter().filter(|r| r.label == 1).count();
        (self.rows.len() - malicious, malicious)
    }
}

/// Ingestion accounting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub kept: usize,
    pub dropped_duplicates: usize,
    pub dropped_in_registry: usize,
}

/// Load a raw `domain_name,label` CSV: rows are normalized, duplicates
/// dropped (first kept), and rows whose domain appears verbatim in the
/// registrant database removed.
pub fn load_dataset(path: &Path, index: &RegistrantIndex) -> Result<(Dataset, LoadReport)> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line?,
        None => return Err(Error::EmptyDataset),
    };
    if header.trim_end_matches('\r') != DATASET_HEADER {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header {DATASET_HEADER:?}, got {header:?}"),
        });
    }
    let mut rows = Vec::new();
    let mut report = LoadReport::default();
    let mut seen: HashSet<String> = HashSet::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let (raw_domain, label_str) = line.rsplit_once(',').ok_or_else(|| Error::Parse {
            line: line_no,
            msg: "expected two comma-separated columns".into(),
        })?;
        let label = parse_label(label_str, line_no)?;
        let domain = DomainName::normalize(raw_domain, false).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        if index.contains(&domain) {
            report.dropped_in_registry += 1;
            continue;
        }
        if !seen.insert(domain.as_str().to_string()) {
            report.dropped_duplicates += 1;
            continue;
        }
        let features = extract_features(&domain, 0.0);
        rows.push(DataRow {
            domain,
            features,
            label,
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    report.kept = rows.len();
    Ok((
        Dataset {
            rows,
            feature_stats: None,
        },
        report,
    ))
}

fn parse_label(s: &str, line: usize) -> Result<u8> {
    match s.trim() {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(Error::Parse {
            line,
            msg: format!("label must be 0 or 1, got {other:?}"),
        }),
    }
}

/// Load an enriched CSV (six columns). Returns the dataset and the number
/// of duplicate rows dropped.
pub fn load_enriched(path: &Path) -> Result<(Dataset, usize)> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line?,
        None => return Err(Error::EmptyDataset),
    };
    if header.trim_end_matches('\r') != ENRICHED_HEADER {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header {ENRICHED_HEADER:?}, got {header:?}"),
        });
    }
    let mut rows = Vec::new();
    let mut dropped = 0usize;
    let mut seen: HashSet<String> = HashSet::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 6 columns, got {}", fields.len()),
            });
        }
        let domain = DomainName::normalize(fields[0], false).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        let label = parse_label(fields[1], line_no)?;
        let similarity_score: f64 = fields[2].parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("bad similarity_score {:?}", fields[2]),
        })?;
        let length: u32 = parse_count(fields[3], "length", line_no)?;
        let digit_count: u32 = parse_count(fields[4], "digit_count", line_no)?;
        let special_char_count: u32 = parse_count(fields[5], "special_character_count", line_no)?;
        if !(0.0..=1.0).contains(&similarity_score) {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("similarity_score {similarity_score} out of [0,1]"),
            });
        }
        if length as usize != domain.char_len() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!(
                    "length column {length} disagrees with domain length {}",
                    domain.char_len()
                ),
            });
        }
        if digit_count + special_char_count > length {
            return Err(Error::Parse {
                line: line_no,
                msg: "digit_count + special_character_count exceeds length".into(),
            });
        }
        if !seen.insert(domain.as_str().to_string()) {
            dropped += 1;
            continue;
        }
        rows.push(DataRow {
            domain,
            features: FeatureRow {
                similarity_score,
                length,
                digit_count,
                special_char_count,
            },
            label,
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok((
        Dataset {
            rows,
            feature_stats: None,
        },
        dropped,
    ))
}

fn parse_count(s: &str, name: &str, line: usize) -> Result<u32> {
    s.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad {name} {s:?}"),
    })
}

/// Write the enriched CSV. Floats use the shortest round-trip encoding, so
/// reloading reproduces them bit for bit.
pub fn write_enriched(ds: &Dataset, w: &mut impl Write) -> Result<()> {
    writeln!(w, "{ENRICHED_HEADER}")?;
    for row in &ds.rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            row.domain,
            row.label,
            row.features.similarity_score,
            row.features.length,
            row.features.digit_count,
            row.features.special_char_count
        )?;
    }
    Ok(())
}

/// Populate every row's similarity score from a top-1 search against the
/// index. Queries fan out across threads; results keep input order.
pub fn enrich(ds: Dataset, index: &RegistrantIndex, mode: RatioMode) -> Dataset {
    let rows: Vec<DataRow> = ds
        .rows
        .into_par_iter()
        .map(|row| {
            let sim = index.best_match(&row.domain, mode).score;
            let features = extract_features(&row.domain, sim);
            DataRow { features, ..row }
        })
        .collect();
    Dataset {
        rows,
        feature_stats: ds.feature_stats,
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_frac: 0.70,
            val_frac: 0.15,
            test_frac: 0.15,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        SplitSpec {
            seed,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let sum = self.train_frac + self.val_frac + self.test_frac;
        if (sum - 1.0).abs() > 1e-9
            || self.train_frac < 0.0
            || self.val_frac < 0.0
            || self.test_frac < 0.0
        {
            return Err(Error::InvalidConfig(format!(
                "split fractions must be non-negative and sum to 1.0, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Seeded uniform shuffle, then `floor(n·train)` / `floor(n·val)` /
/// remainder-to-test. Partitions are disjoint and exhaustive.
pub fn split_dataset(ds: Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    spec.validate()?;
    let n = ds.rows.len();
    // The nudge keeps exact-decimal products (8900 × 0.70 = 6230) from
    // flooring one short under binary rounding.
    let n_train = (n as f64 * spec.train_frac + 1e-6).floor() as usize;
    let n_val = (n as f64 * spec.val_frac + 1e-6).floor() as usize;
    let n_test = n - n_train - n_val;
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::DatasetTooSmall(n));
    }
    let mut rows = ds.rows;
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    idx.shuffle(&mut rng);
    let mut reordered: Vec<DataRow> = Vec::with_capacity(n);
    for &i in &idx {
        reordered.push(rows[i].clone());
    }
    rows.clear();
    let mut it = reordered.into_iter();
    let train: Vec<DataRow> = it.by_ref().take(n_train).collect();
    let val: Vec<DataRow> = it.by_ref().take(n_val).collect();
    let test: Vec<DataRow> = it.collect();
    Ok((
        Dataset {
            rows: train,
            feature_stats: None,
        },
        Dataset {
            rows: val,
            feature_stats: None,
        },
        Dataset {
            rows: test,
            feature_stats: None,
        },
    ))
}

/// Compute feature statistics from the training partition only and attach
/// them to all three datasets. Returns the stats for storage in the model.
pub fn standardize(train: &mut Dataset, val: &mut Dataset, test: &mut Dataset) -> FeatureStats {
    let stats = FeatureStats::from_rows(&train.rows);
    train.feature_stats = Some(stats);
    val.feature_stats = Some(stats);
    test.feature_stats = Some(stats);
    stats
}
