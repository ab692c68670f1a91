//! Confusion counts and the derived detection metrics. Malicious is the
//! positive class throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Tally predictions against truth. Labels are 0 = benign, 1 = malicious.
pub fn confusion(preds: &[u8], truth: &[u8]) -> Result<ConfusionCounts> {
    if preds.len() != truth.len() {
        return Err(Error::LengthMismatch(preds.len(), truth.len()));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &t) in preds.iter().zip(truth.iter()) {
        match (p, t) {
            (1, 1) => c.tp += 1,
            (0, 0) => c.tn += 1,
            (1, 0) => c.fp += 1,
            (0, 1) => c.fn_ += 1,
            _ => panic!("labels must be 0 or 1, got pred={p} truth={t}"),
        }
    }
    Ok(c)
}

/// Accuracy, precision, recall, and F1. Zero denominators yield 0 with the
/// corresponding degenerate flag set rather than failing the evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub degenerate_precision: bool,
    pub degenerate_recall: bool,
}

pub fn metrics_from_confusion(c: &ConfusionCounts) -> Result<Metrics> {
    let total = c.total();
    if total == 0 {
        return Err(Error::EmptyEvaluation);
    }
    let accuracy = (c.tp + c.tn) as f64 / total as f64;
    let (precision, degenerate_precision) = if c.tp + c.fp == 0 {
        (0.0, true)
    } else {
        (c.tp as f64 / (c.tp + c.fp) as f64, false)
    };
    let (recall, degenerate_recall) = if c.tp + c.fn_ == 0 {
        (0.0, true)
    } else {
        (c.tp as f64 / (c.tp + c.fn_) as f64, false)
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Metrics {
        accuracy,
        precision,
        recall,
        f1,
        degenerate_precision,
        degenerate_recall,
    })
}
