//! Feature-space multivariate detection.
//!
//! Instead of forecasting one series, these detectors embed several
//! transformed series as coordinates of a point cloud — one point per
//! timestep — and look for points that sit far from the bulk. The module
//! provides the transforms that build the cloud (logs, derivatives,
//! one-sided rectifications), min-max normalization so no column dominates
//! the Euclidean metric, Leader clustering with an extreme-value-theory
//! threshold over exemplar spacing, and k-nearest-neighbour scores.

mod cluster;
mod knn;

pub use cluster::{evt_threshold, hdoutliers_detect, leader_cluster};
pub use knn::{knn_detect, knn_distances, knn_distances_brute, knn_scores, KnnVariant};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::Timestamp;

/// A point cloud of transformed series: one row per timestep, one column
/// per transformed variable. Rows containing non-finite entries are dropped
/// at construction and recorded, since Euclidean distance is undefined on
/// partial rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    /// Name of each column.
    pub column_names: Vec<String>,
    /// Timestamp of each surviving row.
    pub timestamps: Vec<Timestamp>,
    /// Row-major data, `timestamps.len()` rows by `column_names.len()`
    /// columns, all entries finite.
    pub rows: Vec<Vec<f64>>,
    /// Timestamps of rows dropped for non-finite entries.
    pub dropped: Vec<Timestamp>,
}

impl FeatureMatrix {
    /// Assemble a matrix, dropping (and recording) rows with non-finite
    /// entries. Errors on ragged input or a timestamp/row count mismatch.
    pub fn new(
        column_names: Vec<String>,
        timestamps: Vec<Timestamp>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if timestamps.len() != rows.len() {
            return Err(Error::Alignment(format!(
                "{} timestamps for {} rows",
                timestamps.len(),
                rows.len()
            )));
        }
        let dim = column_names.len();
        let mut kept_times = Vec::with_capacity(rows.len());
        let mut kept_rows = Vec::with_capacity(rows.len());
        let mut dropped = Vec::new();
        for (ts, row) in timestamps.into_iter().zip(rows) {
            if row.len() != dim {
                return Err(Error::Alignment(format!(
                    "row at {ts} has {} entries, expected {dim}",
                    row.len()
                )));
            }
            if row.iter().all(|v| v.is_finite()) {
                kept_times.push(ts);
                kept_rows.push(row);
            } else {
                dropped.push(ts);
            }
        }
        Ok(Self {
            column_names,
            timestamps: kept_times,
            rows: kept_rows,
            dropped,
        })
    }

    /// Number of surviving rows.
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Number of columns.
    pub fn dim(&self) -> usize {
        self.column_names.len()
    }
}

/// Result of a Leader clustering pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ExemplarSet {
    /// Row indices of the representative points, in creation order.
    /// Exemplars are pairwise farther apart than `radius`.
    pub exemplars: Vec<usize>,
    /// For each row, the index into `exemplars` of its representative.
    /// Every row lies within `radius` of its exemplar.
    pub membership: Vec<usize>,
    /// Clustering radius the pass was run with.
    pub radius: f64,
}

/// Which outlier detector produced a score set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMethod {
    /// Leader clustering + extreme-value threshold on exemplar spacing.
    HdOutliers,
    /// Weighted sum of the k nearest-neighbour distances.
    KnnAgg,
    /// Plain sum of the k nearest-neighbour distances.
    KnnSum,
}

impl std::fmt::Display for ScoreMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScoreMethod::HdOutliers => "hd-outliers",
            ScoreMethod::KnnAgg => "knn-agg",
            ScoreMethod::KnnSum => "knn-sum",
        })
    }
}

/// Per-row outlier scores with the threshold that was applied to them.
#[derive(Debug, Clone, PartialEq)]
pub struct OutlierScoreSet {
    /// Detector that produced the scores.
    pub method: ScoreMethod,
    /// One non-negative score per matrix row.
    pub scores: Vec<f64>,
    /// Scores strictly above this are flagged. Infinite when no threshold
    /// was applied (or the score distribution was degenerate).
    pub threshold: f64,
    /// Row indices with `score > threshold`.
    pub flagged: BTreeSet<usize>,
}

impl OutlierScoreSet {
    /// Build the flagged set from scores and threshold.
    pub(crate) fn from_scores(method: ScoreMethod, scores: Vec<f64>, threshold: f64) -> Self {
        let flagged = scores
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > threshold)
            .map(|(i, _)| i)
            .collect();
        Self {
            method,
            scores,
            threshold,
            flagged,
        }
    }
}

/// Which sign of a derivative series to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Keep positive values, zero out negatives.
    Positive,
    /// Keep negative values, zero out positives.
    Negative,
}

/// Elementwise natural log. Values must be strictly positive — sanitize the
/// series first.
pub fn transform_log(series: &[f64]) -> Result<Vec<f64>> {
    series
        .iter()
        .map(|&v| {
            if v > 0.0 && v.is_finite() {
                Ok(v.ln())
            } else {
                Err(Error::Transform(format!(
                    "value {v} cannot enter a log transform; sanitize the series first"
                )))
            }
        })
        .collect()
}

/// Two-sided (central) difference: `(x[t+1] − x[t−1]) / 2` for interior
/// points, one-step forward/backward differences at the endpoints.
pub fn transform_derivative(series: &[f64]) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 3 {
        return Err(Error::InsufficientData {
            context: "central difference",
            needed: 3,
            got: n,
        });
    }
    let mut out = Vec::with_capacity(n);
    out.push(series[1] - series[0]);
    for t in 1..n - 1 {
        out.push((series[t + 1] - series[t - 1]) / 2.0);
    }
    out.push(series[n - 1] - series[n - 2]);
    Ok(out)
}

/// Keep one sign of a derivative series, replacing the other with zero so
/// row alignment is preserved.
pub fn transform_one_sided(series: &[f64], direction: Direction) -> Vec<f64> {
    series
        .iter()
        .map(|&v| match direction {
            Direction::Positive if v > 0.0 => v,
            Direction::Negative if v < 0.0 => v,
            _ => 0.0,
        })
        .collect()
}

/// Min-max scale every column to `[0, 1]` so no single variable dominates
/// Euclidean distances. Constant columns are an error.
pub fn normalize_columns(matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
    let mut out = matrix.clone();
    for col in 0..matrix.dim() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for row in &matrix.rows {
            lo = lo.min(row[col]);
            hi = hi.max(row[col]);
        }
        if !(hi > lo) {
            return Err(Error::DegenerateSeries(format!(
                "column {} is constant and cannot be min-max scaled",
                matrix.column_names[col]
            )));
        }
        let span = hi - lo;
        for row in &mut out.rows {
            row[col] = (row[col] - lo) / span;
        }
    }
    Ok(out)
}

/// Euclidean distance between two rows. Shared by every detector in this
/// module so the clustering, kd-tree, and brute-force routes are comparing
/// identical arithmetic.
pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
