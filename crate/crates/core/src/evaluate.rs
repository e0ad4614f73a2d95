//! Scoring detector output against ground-truth labels.
//!
//! Detection is evaluated as binary classification per observation: a
//! timestamp is a positive when any anomaly label sits on it, and a
//! prediction is positive when the detector flagged it. Rule-detectable
//! anomalies are scored separately and folded into the true-positive count
//! afterwards, since the deterministic rules catch them by construction.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::detect::DetectionTrace;
use crate::error::{Error, Result};
use crate::series::{AnomalyLabel, Timestamp, TypeCode};

/// Binary-classification counts over the evaluated observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// Flagged and labelled.
    pub true_positives: usize,
    /// Flagged but unlabelled.
    pub false_positives: usize,
    /// Unflagged and unlabelled.
    pub true_negatives: usize,
    /// Unflagged but labelled.
    pub false_negatives: usize,
}

impl ConfusionMatrix {
    /// Number of evaluated observations.
    pub fn total(&self) -> usize {
        self.true_positives + self.false_positives + self.true_negatives + self.false_negatives
    }
}

/// Hit counts for one ground-truth anomaly type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerTypeCount {
    /// Labelled observations of this type among the evaluated timestamps.
    pub total: usize,
    /// How many of them the detector flagged.
    pub hit: usize,
}

/// Metrics derived from a confusion matrix, plus optional extras.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// The counts the metrics were derived from.
    pub matrix: ConfusionMatrix,
    /// `(TP + TN) / total`.
    pub accuracy: f64,
    /// `(FP + FN) / total`; complements accuracy exactly.
    pub error_rate: f64,
    /// `TP / (TP + FP)`; `None` when nothing was flagged.
    pub ppv: Option<f64>,
    /// `TN / (TN + FN)`; `None` when nothing was left unflagged.
    pub npv: Option<f64>,
    /// Forecast root-mean-square error on the transformed scale, when a
    /// trace was available.
    pub rmse: Option<f64>,
    /// Ground-truth hit counts per anomaly type.
    pub per_type: BTreeMap<TypeCode, PerTypeCount>,
}

/// Round half-up to two decimals, the convention of the report tables.
/// Full precision is kept everywhere else; this is display-only.
pub fn round_metric(x: f64) -> f64 {
    (x * 100.0 + 0.5).floor() / 100.0
}

fn check_universe(
    evaluated: &[Timestamp],
    flagged: &BTreeSet<Timestamp>,
) -> Result<BTreeSet<Timestamp>> {
    let universe: BTreeSet<Timestamp> = evaluated.iter().copied().collect();
    if universe.len() != evaluated.len() {
        return Err(Error::Alignment(
            "evaluated timestamps contain duplicates".into(),
        ));
    }
    if let Some(stray) = flagged.iter().find(|ts| !universe.contains(ts)) {
        return Err(Error::Alignment(format!(
            "flag at {stray} refers to a timestamp outside the evaluated set"
        )));
    }
    Ok(universe)
}

/// Count the four confusion-matrix cells over `evaluated`.
///
/// An observation is a positive when `labels` holds any anomaly type for
/// its timestamp. Labels outside the evaluated set are ignored (warmup
/// records and rule-claimed timestamps are excluded from model scoring by
/// the caller); a flag outside the evaluated set is an alignment error.
pub fn build_confusion(
    evaluated: &[Timestamp],
    flagged: &BTreeSet<Timestamp>,
    labels: &BTreeMap<Timestamp, AnomalyLabel>,
) -> Result<ConfusionMatrix> {
    check_universe(evaluated, flagged)?;
    let mut matrix = ConfusionMatrix {
        true_positives: 0,
        false_positives: 0,
        true_negatives: 0,
        false_negatives: 0,
    };
    for ts in evaluated {
        let is_anomaly = labels.contains_key(ts);
        let is_flagged = flagged.contains(ts);
        match (is_flagged, is_anomaly) {
            (true, true) => matrix.true_positives += 1,
            (true, false) => matrix.false_positives += 1,
            (false, false) => matrix.true_negatives += 1,
            (false, true) => matrix.false_negatives += 1,
        }
    }
    Ok(matrix)
}

/// Add the rule detectors' guaranteed hits to the true-positive count.
///
/// Rule-claimed timestamps are kept out of the model-based matrix, so
/// folding simply grows the positives: the rules catch their anomaly class
/// by construction and would otherwise be invisible to the metrics.
pub fn fold_class2(matrix: ConfusionMatrix, rule_hits: usize) -> ConfusionMatrix {
    ConfusionMatrix {
        true_positives: matrix.true_positives + rule_hits,
        ..matrix
    }
}

/// Derive the rate metrics from a confusion matrix. Rates with a zero
/// denominator are reported as undefined (`None`), never as zero.
pub fn metrics(matrix: &ConfusionMatrix) -> Result<EvalReport> {
    let total = matrix.total();
    if total == 0 {
        return Err(Error::InsufficientData {
            context: "metric evaluation",
            needed: 1,
            got: 0,
        });
    }
    let total = total as f64;
    let tp = matrix.true_positives as f64;
    let fp = matrix.false_positives as f64;
    let tn = matrix.true_negatives as f64;
    let fneg = matrix.false_negatives as f64;
    let ratio = |num: f64, den: f64| if den > 0.0 { Some(num / den) } else { None };
    Ok(EvalReport {
        matrix: *matrix,
        accuracy: (tp + tn) / total,
        error_rate: (fp + fneg) / total,
        ppv: ratio(tp, tp + fp),
        npv: ratio(tn, tn + fneg),
        rmse: None,
        per_type: BTreeMap::new(),
    })
}

/// Root-mean-square one-step forecast error over the records that carry a
/// forecast, on the model's transformed scale.
pub fn rmse(trace: &DetectionTrace) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for record in &trace.records {
        if let Some(forecast) = record.forecast {
            let err = record.observed - forecast;
            sum += err * err;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::InsufficientData {
            context: "forecast error",
            needed: 1,
            got: 0,
        });
    }
    Ok((sum / count as f64).sqrt())
}

/// Per-anomaly-type totals and hits over the evaluated timestamps, the
/// shape of the per-type report tables.
pub fn per_type_report(
    evaluated: &[Timestamp],
    flagged: &BTreeSet<Timestamp>,
    labels: &BTreeMap<Timestamp, AnomalyLabel>,
) -> Result<BTreeMap<TypeCode, PerTypeCount>> {
    let universe = check_universe(evaluated, flagged)?;
    let mut report: BTreeMap<TypeCode, PerTypeCount> = BTreeMap::new();
    for (ts, label) in labels {
        if !universe.contains(ts) {
            continue;
        }
        let entry = report.entry(label.type_code).or_default();
        entry.total += 1;
        if flagged.contains(ts) {
            entry.hit += 1;
        }
    }
    Ok(report)
}
