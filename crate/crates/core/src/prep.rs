//! Preprocessing: nonpositive-value repair, training-set assembly, and
//! covariate alignment.
//!
//! Forecasting runs on log-transformed values, so nonpositive readings
//! (impossible values, sensor glitches) must be repaired first — each one
//! inherits the nearest preceding positive value. Training additionally
//! excludes observations labelled with sudden-change or needs-review
//! anomalies, so models learn normal behaviour only.

use crate::error::{Error, Result};
use crate::series::{AnomalyClass, SeriesFrame, Timestamp};

/// A frame with nonpositive values repaired, plus the record of what was
/// touched.
#[derive(Debug, Clone, PartialEq)]
pub struct SanitizedFrame {
    /// The repaired frame.
    pub frame: SeriesFrame,
    /// Timestamps whose values were replaced.
    pub replaced: Vec<Timestamp>,
}

/// Replace every value ≤ 0 with the nearest preceding positive value.
/// Replacements cascade: a run of nonpositive values all inherit the same
/// predecessor. The first observation must be positive, since it has no
/// predecessor to borrow from.
pub fn sanitize_nonpositive(frame: &SeriesFrame) -> Result<SanitizedFrame> {
    let mut out = frame.clone();
    let mut replaced = Vec::new();
    let mut last_positive: Option<f64> = None;
    for obs in &mut out.observations {
        if obs.value > 0.0 && obs.value.is_finite() {
            last_positive = Some(obs.value);
        } else {
            match last_positive {
                Some(v) => {
                    obs.value = v;
                    replaced.push(obs.timestamp);
                }
                None => {
                    return Err(Error::LeadingNonpositive {
                        timestamp: obs.timestamp,
                    })
                }
            }
        }
    }
    Ok(SanitizedFrame {
        frame: out,
        replaced,
    })
}

/// A cleaned, log-transformed training series with its timestamps, ready
/// for model fitting and covariate alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    /// Timestamps of the retained observations, in time order.
    pub timestamps: Vec<Timestamp>,
    /// Natural logs of the retained values.
    pub log_values: Vec<f64>,
}

/// Fewest observations a model may be trained on.
pub const MIN_TRAINING_POINTS: usize = 50;

/// Build a training series: repair nonpositive values, drop observations
/// labelled with sudden-change or needs-review anomalies (rule-detectable
/// ones are already neutralized by the repair and the rules), then take
/// logs.
pub fn build_training_set(frame: &SeriesFrame) -> Result<TrainingSet> {
    let sanitized = sanitize_nonpositive(frame)?;
    let mut timestamps = Vec::new();
    let mut log_values = Vec::new();
    for obs in &sanitized.frame.observations {
        let excluded = matches!(
            sanitized.frame.label_at(obs.timestamp).map(|l| l.class()),
            Some(AnomalyClass::SuddenChange) | Some(AnomalyClass::NeedsReview)
        );
        if !excluded {
            timestamps.push(obs.timestamp);
            log_values.push(obs.value.ln());
        }
    }
    if log_values.len() < MIN_TRAINING_POINTS {
        return Err(Error::InsufficientData {
            context: "training set",
            needed: MIN_TRAINING_POINTS,
            got: log_values.len(),
        });
    }
    Ok(TrainingSet {
        timestamps,
        log_values,
    })
}

/// Linearly interpolate the covariate series at each target timestamp.
/// Exact timestamp matches return the recorded value; targets outside the
/// covariate's time span are an error rather than an extrapolation.
pub fn interpolate_covariate(target: &SeriesFrame, covariate: &SeriesFrame) -> Result<Vec<f64>> {
    covariate.ensure_time_ordered()?;
    if covariate.is_empty() {
        return Err(Error::InsufficientData {
            context: "covariate interpolation",
            needed: 1,
            got: 0,
        });
    }
    let times = covariate.timestamps();
    let values = covariate.values();
    let mut out = Vec::with_capacity(target.len());
    for ts in target.timestamps() {
        if ts < times[0] || ts > times[times.len() - 1] {
            return Err(Error::CovariateExtrapolation { timestamp: ts });
        }
        let at = match times.binary_search(&ts) {
            Ok(i) => values[i],
            Err(i) => {
                // times[i-1] < ts < times[i]; both exist because the span
                // check above rules out the ends.
                let (t0, t1) = (times[i - 1], times[i]);
                let (v0, v1) = (values[i - 1], values[i]);
                let whole = (t1 - t0).num_seconds() as f64;
                let part = (ts - t0).num_seconds() as f64;
                v0 + (v1 - v0) * (part / whole)
            }
        };
        out.push(at);
    }
    Ok(out)
}

/// Align interpolated values with a training set's timestamps: the
/// covariate rows a regression model needs, one single-column row per
/// retained training point.
pub fn covariate_rows(values: &[f64], frame_timestamps: &[Timestamp], keep: &[Timestamp]) -> Result<Vec<Vec<f64>>> {
    if values.len() != frame_timestamps.len() {
        return Err(Error::Alignment(format!(
            "{} covariate values for {} timestamps",
            values.len(),
            frame_timestamps.len()
        )));
    }
    let mut out = Vec::with_capacity(keep.len());
    let mut cursor = 0usize;
    for ts in keep {
        while cursor < frame_timestamps.len() && frame_timestamps[cursor] != *ts {
            cursor += 1;
        }
        if cursor == frame_timestamps.len() {
            return Err(Error::Alignment(format!(
                "training timestamp {ts} not found in the frame"
            )));
        }
        out.push(vec![values[cursor]]);
    }
    Ok(out)
}
