//! Deterministic if-then classification rules.
//!
//! These catch the anomalies that need no model at all: physically
//! impossible readings (type F), readings outside the sensor's detectable
//! range (type G), and the first observation after an extended gap in the
//! record (type K). They run before any model-based detector, and their hits
//! are excluded from what the models are asked to explain.

use crate::error::Result;
use crate::series::{DetectorConfig, SensorSpec, SeriesFrame, Timestamp, TypeCode};

/// One rule hit: a timestamp, which rule fired, and a human-readable reason.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleFinding {
    /// Timestamp of the flagged observation.
    pub timestamp: Timestamp,
    /// `F`, `G`, or `K` — the only codes rules can assign.
    pub type_code: TypeCode,
    /// Why the rule fired, for reports and flag files.
    pub reason: String,
}

/// Flag the first observation after every gap longer than
/// `max_gap_minutes`. The first observation of the frame is never flagged:
/// there is no preceding observation to measure a gap from.
pub fn detect_missing_gap(frame: &SeriesFrame, max_gap_minutes: f64) -> Result<Vec<RuleFinding>> {
    frame.ensure_time_ordered()?;
    let mut findings = Vec::new();
    for pair in frame.observations.windows(2) {
        let gap_minutes = (pair[1].timestamp - pair[0].timestamp).num_seconds() as f64 / 60.0;
        if gap_minutes > max_gap_minutes {
            findings.push(RuleFinding {
                timestamp: pair[1].timestamp,
                type_code: TypeCode::K,
                reason: format!(
                    "first observation after a {gap_minutes:.0}-minute gap \
                     (threshold {max_gap_minutes:.0} minutes)"
                ),
            });
        }
    }
    Ok(findings)
}

/// Flag physically impossible readings: every negative value, and zero when
/// the sensor spec says zero cannot occur for this variable.
pub fn detect_impossible(frame: &SeriesFrame, spec: &SensorSpec) -> Result<Vec<RuleFinding>> {
    frame.ensure_time_ordered()?;
    let mut findings = Vec::new();
    for obs in &frame.observations {
        if obs.value < 0.0 {
            findings.push(RuleFinding {
                timestamp: obs.timestamp,
                type_code: TypeCode::F,
                reason: format!("negative reading {} is physically impossible", obs.value),
            });
        } else if obs.value == 0.0 && spec.zero_is_impossible {
            findings.push(RuleFinding {
                timestamp: obs.timestamp,
                type_code: TypeCode::F,
                reason: format!(
                    "zero reading is physically impossible for {}",
                    spec.variable
                ),
            });
        }
    }
    Ok(findings)
}

/// Flag readings outside the sensor's detectable range
/// `[min_detectable, max_detectable]`, skipping any reading the
/// impossible-value rule already claims (F takes precedence over G).
pub fn detect_out_of_range(frame: &SeriesFrame, spec: &SensorSpec) -> Result<Vec<RuleFinding>> {
    frame.ensure_time_ordered()?;
    spec.validate()?;
    let mut findings = Vec::new();
    for obs in &frame.observations {
        let impossible = obs.value < 0.0 || (obs.value == 0.0 && spec.zero_is_impossible);
        if impossible {
            continue;
        }
        if obs.value < spec.min_detectable || obs.value > spec.max_detectable {
            findings.push(RuleFinding {
                timestamp: obs.timestamp,
                type_code: TypeCode::G,
                reason: format!(
                    "reading {} outside detectable range [{}, {}]",
                    obs.value, spec.min_detectable, spec.max_detectable
                ),
            });
        }
    }
    Ok(findings)
}

/// Run all three rules and merge their findings into one time-ordered list
/// with at most one finding per timestamp. When several rules fire on the
/// same observation the most severe wins: F over G over K.
pub fn run_rules(
    frame: &SeriesFrame,
    spec: &SensorSpec,
    config: &DetectorConfig,
) -> Result<Vec<RuleFinding>> {
    config.validate()?;
    let mut merged: std::collections::BTreeMap<Timestamp, RuleFinding> = std::collections::BTreeMap::new();
    // Insertion order encodes precedence: later, lower-severity findings
    // never displace an existing entry.
    for finding in detect_impossible(frame, spec)?
        .into_iter()
        .chain(detect_out_of_range(frame, spec)?)
        .chain(detect_missing_gap(frame, config.max_gap_minutes)?)
    {
        merged.entry(finding.timestamp).or_insert(finding);
    }
    Ok(merged.into_values().collect())
}
