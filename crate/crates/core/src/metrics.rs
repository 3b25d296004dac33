//! Confusion-matrix accounting and the four evaluation metrics.
//!
//! The positive class is 1 (vulnerable). Metrics with a zero denominator
//! are reported as 0 together with an explicit flag, so sweep tables stay
//! rectangular without ever passing off a fabricated value as measured.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Classification outcome counts over an evaluated set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.fp + self.tn
    }
}

/// Which metrics hit a zero denominator and were reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricFlag {
    RecallUndefined,
    PrecisionUndefined,
    F1Undefined,
}

/// The four metrics plus flags for any undefined ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub flags: Vec<MetricFlag>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("got {predictions} predictions but {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("nothing to evaluate")]
    EmptyInput,
}

/// Tally predictions against labels. Positive class is 1.
pub fn confusion(predictions: &[u8], labels: &[u8]) -> Result<ConfusionCounts, MetricsError> {
    if predictions.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut c = ConfusionCounts {
        tp: 0,
        fn_: 0,
        fp: 0,
        tn: 0,
    };
    for (&pred, &label) in predictions.iter().zip(labels) {
        match (pred != 0, label != 0) {
            (true, true) => c.tp += 1,
            (false, true) => c.fn_ += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Accuracy, recall, precision, and F1 from the counts.
pub fn metrics(c: &ConfusionCounts) -> Result<MetricsReport, MetricsError> {
    let total = c.total();
    if total == 0 {
        return Err(MetricsError::EmptyInput);
    }
    let mut flags = Vec::new();
    let mut ratio = |num: u64, denom: u64, flag: MetricFlag| {
        if denom == 0 {
            flags.push(flag);
            0.0
        } else {
            num as f64 / denom as f64
        }
    };
    let accuracy = (c.tp + c.tn) as f64 / total as f64;
    let recall = ratio(c.tp, c.tp + c.fn_, MetricFlag::RecallUndefined);
    let precision = ratio(c.tp, c.tp + c.fp, MetricFlag::PrecisionUndefined);
    let f1 = if precision + recall == 0.0 {
        flags.push(MetricFlag::F1Undefined);
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(MetricsReport {
        accuracy,
        recall,
        precision,
        f1,
        flags,
    })
}

/// Counts and metrics combined into the evaluation JSON schema, keys in
/// reading order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
    pub accuracy: f64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub flags: Vec<MetricFlag>,
}

impl EvalReport {
    pub fn new(counts: ConfusionCounts, report: MetricsReport) -> EvalReport {
        EvalReport {
            tp: counts.tp,
            fn_: counts.fn_,
            fp: counts.fp,
            tn: counts.tn,
            accuracy: report.accuracy,
            recall: report.recall,
            precision: report.precision,
            f1: report.f1,
            flags: report.flags,
        }
    }
}
