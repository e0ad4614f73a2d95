//! Leader clustering and the extreme-value outlier threshold.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::series::DetectorConfig;

use super::{euclidean, ExemplarSet, FeatureMatrix, OutlierScoreSet, ScoreMethod};

/// Single-pass Leader clustering in row order: a point within `radius` of
/// an existing exemplar joins the first such exemplar, otherwise it becomes
/// a new exemplar itself.
pub fn leader_cluster(matrix: &FeatureMatrix, radius: f64) -> Result<ExemplarSet> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "clustering radius must be positive and finite, got {radius}"
        )));
    }
    let mut exemplars: Vec<usize> = Vec::new();
    let mut membership = Vec::with_capacity(matrix.n_rows());
    for (i, row) in matrix.rows.iter().enumerate() {
        let joined = exemplars
            .iter()
            .position(|&e| euclidean(row, &matrix.rows[e]) <= radius);
        match joined {
            Some(slot) => membership.push(slot),
            None => {
                exemplars.push(i);
                membership.push(exemplars.len() - 1);
            }
        }
    }
    Ok(ExemplarSet {
        exemplars,
        membership,
        radius,
    })
}

/// Interpolated median of an ascending-sorted slice.
fn median_sorted(sorted: &[f64]) -> f64 {
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        (sorted[m / 2 - 1] + sorted[m / 2]) / 2.0
    }
}

/// Outlier threshold from an exponential tail fitted to the upper half of
/// the positive distances.
///
/// The rate is estimated from the mean excess over the median; the
/// threshold is the median plus that exponential's `1 − evt_alpha`
/// quantile, so under the fitted tail roughly `evt_alpha / 2` of the total
/// mass sits above it. Returns `+∞` (nothing flaggable) when the distances
/// are all equal or none are positive.
pub fn evt_threshold(nn_distances: &[f64], evt_alpha: f64) -> Result<f64> {
    if !(evt_alpha > 0.0 && evt_alpha < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "tail probability must be in (0, 1), got {evt_alpha}"
        )));
    }
    if nn_distances.len() < 10 {
        return Err(Error::InsufficientData {
            context: "extreme-value threshold",
            needed: 10,
            got: nn_distances.len(),
        });
    }
    if nn_distances.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(Error::InvalidConfig(
            "distances must be finite and non-negative".into(),
        ));
    }
    let mut positive: Vec<f64> = nn_distances.iter().copied().filter(|&d| d > 0.0).collect();
    if positive.is_empty() {
        return Ok(f64::INFINITY);
    }
    positive.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    if positive[0] == positive[positive.len() - 1] {
        return Ok(f64::INFINITY);
    }
    let median = median_sorted(&positive);
    // Upper half by count; the larger half when the count is odd.
    let upper = &positive[positive.len() / 2..];
    let mean_excess = upper.iter().map(|d| d - median).sum::<f64>() / upper.len() as f64;
    // A tail whose spread is float noise relative to its location is a
    // point mass (e.g. lattice data); a median-level threshold there would
    // flag rounding error, so treat it like the all-equal case.
    if mean_excess <= median * 1e-9 {
        return Ok(f64::INFINITY);
    }
    Ok(median + mean_excess * (1.0 / evt_alpha).ln())
}

/// Leader clustering radius for an `n`-point, `dim`-column matrix.
fn leader_radius(n: usize, dim: usize) -> f64 {
    0.1 / (n as f64).ln().powf(1.0 / dim as f64)
}

/// Cluster-then-threshold outlier detection on a normalized matrix.
///
/// A Leader pass with radius `0.1 / (ln n)^(1/dim)` compresses the cloud to
/// exemplars; each exemplar is scored by the distance to its nearest other
/// exemplar; the extreme-value threshold is fitted to those spacings; and
/// every member of an exemplar whose spacing exceeds the threshold is
/// flagged. Rows inherit their exemplar's score.
pub fn hdoutliers_detect(
    matrix: &FeatureMatrix,
    config: &DetectorConfig,
) -> Result<OutlierScoreSet> {
    config.validate()?;
    let n = matrix.n_rows();
    if n < 2 || matrix.dim() == 0 {
        return Err(Error::InsufficientData {
            context: "cluster outlier detection",
            needed: 2,
            got: n,
        });
    }
    let radius = leader_radius(n, matrix.dim());
    let clusters = leader_cluster(matrix, radius)?;

    // Nearest-exemplar spacing per exemplar.
    let points: Vec<&[f64]> = clusters
        .exemplars
        .iter()
        .map(|&e| matrix.rows[e].as_slice())
        .collect();
    let mut spacing = vec![f64::INFINITY; points.len()];
    for i in 0..points.len() {
        for j in 0..points.len() {
            if i != j {
                let d = euclidean(points[i], points[j]);
                if d < spacing[i] {
                    spacing[i] = d;
                }
            }
        }
    }
    let threshold = evt_threshold(&spacing, config.evt_alpha)?;

    let flagged_exemplars: BTreeSet<usize> = spacing
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > threshold)
        .map(|(slot, _)| slot)
        .collect();
    let scores = clusters
        .membership
        .iter()
        .map(|&slot| spacing[slot])
        .collect::<Vec<f64>>();
    let flagged = clusters
        .membership
        .iter()
        .enumerate()
        .filter(|(_, slot)| flagged_exemplars.contains(slot))
        .map(|(row, _)| row)
        .collect();
    Ok(OutlierScoreSet {
        method: ScoreMethod::HdOutliers,
        scores,
        threshold,
        flagged,
    })
}
