//! Canonical data model: observations, series frames, anomaly labels,
//! sensor specifications, and the shared detector configuration.
//!
//! Everything downstream (rules, forecasting detectors, feature detectors,
//! evaluation) speaks in terms of these types. They are plain immutable data
//! carriers: construct them, hand them around, never mutate in place.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Timestamps are UTC instants with second precision. Irregular spacing is
/// preserved as-is; nothing in this crate resamples.
pub type Timestamp = DateTime<Utc>;

/// A single sensor reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// When the reading was taken (UTC).
    pub timestamp: Timestamp,
    /// The recorded value in the variable's native units (e.g. NTU for
    /// turbidity, µS/cm for conductivity, m for level). Any real is
    /// representable here — negative and zero readings are data, not errors,
    /// because detecting them is the point.
    pub value: f64,
    /// Original-sensor quality flag, carried opaquely and never interpreted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<String>,
}

impl Observation {
    /// Convenience constructor without a quality flag.
    pub fn new(timestamp: Timestamp, value: f64) -> Self {
        Self {
            timestamp,
            value,
            quality: None,
        }
    }
}

/// One-letter anomaly type code.
///
/// The letters partition into three classes (see [`AnomalyClass`]): sudden
/// single-point changes that a one-step-ahead forecaster can catch, events
/// that simple physical rules catch, and longer structural events that
/// usually need review.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TypeCode {
    /// Large sudden spike.
    A,
    /// Low-variability period (flat-lining battery, fouling).
    B,
    /// Period of anomalously high variability.
    C,
    /// Sudden isolated drop.
    D,
    /// Small sudden spike.
    E,
    /// Impossible value (negative, or zero where zero cannot occur).
    F,
    /// Value outside the sensor's detectable range.
    G,
    /// Drift away from the true signal.
    H,
    /// Sudden shift in level.
    I,
    /// Isolated untrustworthy point flagged in the source record.
    J,
    /// First observation after an extended gap in the record.
    K,
    /// Other labelled disturbance (e.g. calibration/maintenance artefacts).
    L,
}

impl TypeCode {
    /// All twelve codes in letter order.
    pub const ALL: [TypeCode; 12] = [
        TypeCode::A,
        TypeCode::B,
        TypeCode::C,
        TypeCode::D,
        TypeCode::E,
        TypeCode::F,
        TypeCode::G,
        TypeCode::H,
        TypeCode::I,
        TypeCode::J,
        TypeCode::K,
        TypeCode::L,
    ];

    /// The letter for this code.
    pub fn as_char(self) -> char {
        match self {
            TypeCode::A => 'A',
            TypeCode::B => 'B',
            TypeCode::C => 'C',
            TypeCode::D => 'D',
            TypeCode::E => 'E',
            TypeCode::F => 'F',
            TypeCode::G => 'G',
            TypeCode::H => 'H',
            TypeCode::I => 'I',
            TypeCode::J => 'J',
            TypeCode::K => 'K',
            TypeCode::L => 'L',
        }
    }

    /// Parse a single letter (case-sensitive, `A..=L`).
    pub fn from_char(c: char) -> Result<Self> {
        Ok(match c {
            'A' => TypeCode::A,
            'B' => TypeCode::B,
            'C' => TypeCode::C,
            'D' => TypeCode::D,
            'E' => TypeCode::E,
            'F' => TypeCode::F,
            'G' => TypeCode::G,
            'H' => TypeCode::H,
            'I' => TypeCode::I,
            'J' => TypeCode::J,
            'K' => TypeCode::K,
            'L' => TypeCode::L,
            other => return Err(Error::UnknownTypeCode(other)),
        })
    }

    /// The class this code belongs to.
    pub fn class(self) -> AnomalyClass {
        classify_type_to_class(self)
    }
}

impl fmt::Display for TypeCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl std::str::FromStr for TypeCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => TypeCode::from_char(c),
            _ => Err(Error::UnknownTypeCode(s.chars().next().unwrap_or('?'))),
        }
    }
}

/// The three anomaly classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AnomalyClass {
    /// Class 1: sudden changes in value, targets for one-step-ahead
    /// forecasting detectors.
    SuddenChange,
    /// Class 2: detectable by deterministic classification rules.
    RuleDetectable,
    /// Class 3: longer structural events that likely require user review.
    NeedsReview,
}

impl AnomalyClass {
    /// The conventional 1/2/3 numbering.
    pub fn number(self) -> u8 {
        match self {
            AnomalyClass::SuddenChange => 1,
            AnomalyClass::RuleDetectable => 2,
            AnomalyClass::NeedsReview => 3,
        }
    }

    /// Inverse of [`AnomalyClass::number`].
    pub fn from_number(n: u8) -> Result<Self> {
        Ok(match n {
            1 => AnomalyClass::SuddenChange,
            2 => AnomalyClass::RuleDetectable,
            3 => AnomalyClass::NeedsReview,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "anomaly class must be 1, 2, or 3, got {other}"
                )))
            }
        })
    }
}

impl fmt::Display for AnomalyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Map a type code to its class.
pub fn classify_type_to_class(type_code: TypeCode) -> AnomalyClass {
    use TypeCode::*;
    match type_code {
        A | D | I | J => AnomalyClass::SuddenChange,
        F | G | K => AnomalyClass::RuleDetectable,
        B | C | E | H | L => AnomalyClass::NeedsReview,
    }
}

/// Where a label (or a detector finding recorded as a label) came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Hand-labelled ground truth.
    GroundTruth,
    /// Produced by a deterministic classification rule.
    Rule,
    /// Produced by a regression-based detector.
    Regression,
    /// Produced by a feature-based detector.
    Feature,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Provenance::GroundTruth => "ground-truth",
            Provenance::Rule => "rule",
            Provenance::Regression => "regression",
            Provenance::Feature => "feature",
        };
        f.write_str(s)
    }
}

/// A per-observation anomaly label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnomalyLabel {
    /// One-letter type code; the class is always derived from it.
    pub type_code: TypeCode,
    /// Where the label came from.
    pub provenance: Provenance,
}

impl AnomalyLabel {
    /// A hand-labelled ground-truth label.
    pub fn ground_truth(type_code: TypeCode) -> Self {
        Self {
            type_code,
            provenance: Provenance::GroundTruth,
        }
    }

    /// The class implied by the type code.
    pub fn class(&self) -> AnomalyClass {
        self.type_code.class()
    }
}

/// A named series of observations with optional per-timestamp ground-truth
/// labels.
///
/// Multi-observation anomaly events are represented as contiguous runs of
/// the same type code; there is no separate "event" object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFrame {
    /// Variable name, e.g. `"turbidity"`.
    pub name: String,
    /// Observations in strictly increasing timestamp order.
    pub observations: Vec<Observation>,
    /// Ground-truth labels keyed by observation timestamp.
    pub labels: BTreeMap<Timestamp, AnomalyLabel>,
}

impl SeriesFrame {
    /// Build a frame, rejecting out-of-order or duplicate timestamps and
    /// labels at absent timestamps. Use [`validate_frame`] instead when a
    /// report of every problem is wanted.
    pub fn new(
        name: impl Into<String>,
        observations: Vec<Observation>,
        labels: BTreeMap<Timestamp, AnomalyLabel>,
    ) -> Result<Self> {
        let frame = Self {
            name: name.into(),
            observations,
            labels,
        };
        let report = validate_frame(&frame);
        if let Some(finding) = report.findings.first() {
            return Err(Error::Alignment(format!(
                "frame {:?}: {finding}",
                frame.name
            )));
        }
        Ok(frame)
    }

    /// Build an unlabelled frame.
    pub fn unlabelled(name: impl Into<String>, observations: Vec<Observation>) -> Result<Self> {
        Self::new(name, observations, BTreeMap::new())
    }

    /// Number of observations.
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    /// True when the frame holds no observations.
    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// The raw values in time order.
    pub fn values(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.value).collect()
    }

    /// The timestamps in time order.
    pub fn timestamps(&self) -> Vec<Timestamp> {
        self.observations.iter().map(|o| o.timestamp).collect()
    }

    /// The ground-truth label at a timestamp, if any.
    pub fn label_at(&self, timestamp: Timestamp) -> Option<&AnomalyLabel> {
        self.labels.get(&timestamp)
    }

    /// Error unless timestamps are strictly increasing. Detectors call this
    /// on entry so the rest of their logic may assume ordering.
    pub fn ensure_time_ordered(&self) -> Result<()> {
        for pair in self.observations.windows(2) {
            if pair[0].timestamp >= pair[1].timestamp {
                return Err(Error::Alignment(format!(
                    "frame {:?}: timestamps not strictly increasing at {}",
                    self.name, pair[1].timestamp
                )));
            }
        }
        Ok(())
    }
}

/// One problem found by [`validate_frame`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationFinding {
    /// Two observations share a timestamp.
    DuplicateTimestamp { timestamp: Timestamp },
    /// An observation's timestamp precedes its predecessor's.
    NonMonotoneTimestamp { timestamp: Timestamp },
    /// A label refers to a timestamp with no observation.
    OrphanLabel { timestamp: Timestamp },
}

impl fmt::Display for ValidationFinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationFinding::DuplicateTimestamp { timestamp } => {
                write!(f, "duplicate timestamp {timestamp}")
            }
            ValidationFinding::NonMonotoneTimestamp { timestamp } => {
                write!(f, "non-monotone timestamp {timestamp}")
            }
            ValidationFinding::OrphanLabel { timestamp } => {
                write!(f, "label at absent timestamp {timestamp}")
            }
        }
    }
}

/// Report-only result of [`validate_frame`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    /// Everything wrong with the frame, in timestamp order per category.
    pub findings: Vec<ValidationFinding>,
}

impl ValidationReport {
    /// True when no problems were found.
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Check a frame for duplicate or non-monotone timestamps and orphan labels.
/// Never fails; valid frames come back with an empty report.
pub fn validate_frame(frame: &SeriesFrame) -> ValidationReport {
    let mut findings = Vec::new();
    for pair in frame.observations.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        if next.timestamp == prev.timestamp {
            findings.push(ValidationFinding::DuplicateTimestamp {
                timestamp: next.timestamp,
            });
        } else if next.timestamp < prev.timestamp {
            findings.push(ValidationFinding::NonMonotoneTimestamp {
                timestamp: next.timestamp,
            });
        }
    }
    let mut idx = 0usize;
    for &label_ts in frame.labels.keys() {
        // Labels and observations are both time-ordered, so a single merge
        // pass suffices.
        while idx < frame.observations.len() && frame.observations[idx].timestamp < label_ts {
            idx += 1;
        }
        let present =
            idx < frame.observations.len() && frame.observations[idx].timestamp == label_ts;
        if !present {
            findings.push(ValidationFinding::OrphanLabel {
                timestamp: label_ts,
            });
        }
    }
    ValidationReport { findings }
}

/// Physical limits of a sensor, used by the deterministic rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    /// Variable this spec applies to, e.g. `"turbidity"`.
    pub variable: String,
    /// Smallest value the sensor can physically report.
    pub min_detectable: f64,
    /// Largest value the sensor can physically report.
    pub max_detectable: f64,
    /// True when a reading of exactly zero is physically impossible for
    /// this variable (so zero is treated like a negative reading).
    pub zero_is_impossible: bool,
}

impl SensorSpec {
    /// Error unless `min_detectable < max_detectable` and both are finite.
    pub fn validate(&self) -> Result<()> {
        if !self.min_detectable.is_finite() || !self.max_detectable.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "sensor spec for {:?}: detectable bounds must be finite",
                self.variable
            )));
        }
        if self.min_detectable >= self.max_detectable {
            return Err(Error::InvalidConfig(format!(
                "sensor spec for {:?}: min_detectable {} must be below max_detectable {}",
                self.variable, self.min_detectable, self.max_detectable
            )));
        }
        Ok(())
    }
}

/// Shared detector configuration with the defaults used throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Two-sided significance level of the prediction interval.
    pub alpha: f64,
    /// Gaps longer than this many minutes mark the next observation.
    pub max_gap_minutes: f64,
    /// Neighbour count for the k-nearest-neighbour score detectors.
    pub k_neighbours: usize,
    /// Tail probability for the extreme-value outlier threshold.
    pub evt_alpha: f64,
    /// Largest autoregressive order searched.
    pub p_max: usize,
    /// Largest moving-average order searched.
    pub q_max: usize,
    /// Largest differencing order searched.
    pub d_max: usize,
    /// Lower bound on the residual scale so prediction intervals never
    /// collapse to zero width.
    pub s_floor: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            max_gap_minutes: 180.0,
            k_neighbours: 10,
            evt_alpha: 0.05,
            p_max: 5,
            q_max: 5,
            d_max: 2,
            s_floor: 1e-8,
        }
    }
}

impl DetectorConfig {
    /// Error unless every field is inside its documented range.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.max_gap_minutes > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "max_gap_minutes must be positive, got {}",
                self.max_gap_minutes
            )));
        }
        if self.k_neighbours == 0 {
            return Err(Error::InvalidConfig(
                "k_neighbours must be at least 1".into(),
            ));
        }
        if !(self.evt_alpha > 0.0 && self.evt_alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "evt_alpha must lie in (0, 1), got {}",
                self.evt_alpha
            )));
        }
        if !(self.s_floor > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "s_floor must be positive, got {}",
                self.s_floor
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn ts(minutes: i64) -> Timestamp {
        Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap() + chrono::Duration::minutes(minutes)
    }

    #[test]
    fn class_assignment_is_exhaustive_and_matches_taxonomy() {
        let expected = [
            (TypeCode::A, 1),
            (TypeCode::B, 3),
            (TypeCode::C, 3),
            (TypeCode::D, 1),
            (TypeCode::E, 3),
            (TypeCode::F, 2),
            (TypeCode::G, 2),
            (TypeCode::H, 3),
            (TypeCode::I, 1),
            (TypeCode::J, 1),
            (TypeCode::K, 2),
            (TypeCode::L, 3),
        ];
        assert_eq!(expected.len(), TypeCode::ALL.len());
        for (code, class) in expected {
            assert_eq!(classify_type_to_class(code).number(), class, "code {code}");
        }
    }

    #[test]
    fn type_code_round_trips_through_char() {
        for code in TypeCode::ALL {
            assert_eq!(TypeCode::from_char(code.as_char()).unwrap(), code);
        }
        assert!(matches!(
            TypeCode::from_char('Z'),
            Err(Error::UnknownTypeCode('Z'))
        ));
        assert!(TypeCode::from_char('a').is_err());
    }

    #[test]
    fn clean_frame_produces_empty_report() {
        let frame = SeriesFrame::new(
            "turbidity",
            vec![
                Observation::new(ts(0), 1.0),
                Observation::new(ts(60), 2.0),
                Observation::new(ts(120), 3.0),
            ],
            BTreeMap::from([(ts(60), AnomalyLabel::ground_truth(TypeCode::A))]),
        )
        .unwrap();
        assert!(validate_frame(&frame).is_clean());
        frame.ensure_time_ordered().unwrap();
    }

    #[test]
    fn duplicate_timestamp_is_reported_once() {
        let frame = SeriesFrame {
            name: "x".into(),
            observations: vec![
                Observation::new(ts(0), 1.0),
                Observation::new(ts(0), 2.0),
                Observation::new(ts(60), 3.0),
            ],
            labels: BTreeMap::new(),
        };
        let report = validate_frame(&frame);
        assert_eq!(
            report.findings,
            vec![ValidationFinding::DuplicateTimestamp { timestamp: ts(0) }]
        );
        assert!(SeriesFrame::new("x", frame.observations, BTreeMap::new()).is_err());
    }

    #[test]
    fn non_monotone_timestamp_is_reported() {
        let frame = SeriesFrame {
            name: "x".into(),
            observations: vec![
                Observation::new(ts(60), 1.0),
                Observation::new(ts(0), 2.0),
            ],
            labels: BTreeMap::new(),
        };
        let report = validate_frame(&frame);
        assert_eq!(
            report.findings,
            vec![ValidationFinding::NonMonotoneTimestamp { timestamp: ts(0) }]
        );
        assert!(frame.ensure_time_ordered().is_err());
    }

    #[test]
    fn orphan_label_is_reported() {
        let frame = SeriesFrame {
            name: "x".into(),
            observations: vec![Observation::new(ts(0), 1.0)],
            labels: BTreeMap::from([(ts(30), AnomalyLabel::ground_truth(TypeCode::H))]),
        };
        let report = validate_frame(&frame);
        assert_eq!(
            report.findings,
            vec![ValidationFinding::OrphanLabel { timestamp: ts(30) }]
        );
    }

    #[test]
    fn default_config_is_valid_and_has_documented_values() {
        let config = DetectorConfig::default();
        config.validate().unwrap();
        assert_eq!(config.alpha, 0.01);
        assert_eq!(config.max_gap_minutes, 180.0);
        assert_eq!(config.k_neighbours, 10);
        assert_eq!(config.evt_alpha, 0.05);
        assert_eq!(config.p_max, 5);
        assert_eq!(config.q_max, 5);
        assert_eq!(config.d_max, 2);
        assert_eq!(config.s_floor, 1e-8);
    }

    #[test]
    fn config_bounds_are_enforced() {
        let mut config = DetectorConfig {
            alpha: 0.0,
            ..DetectorConfig::default()
        };
        assert!(config.validate().is_err());
        config.alpha = 1.0;
        assert!(config.validate().is_err());
        config.alpha = 0.01;
        config.k_neighbours = 0;
        assert!(config.validate().is_err());
        config.k_neighbours = 10;
        config.max_gap_minutes = -1.0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn sensor_spec_requires_ordered_bounds() {
        let spec = SensorSpec {
            variable: "turbidity".into(),
            min_detectable: 0.0,
            max_detectable: 1000.0,
            zero_is_impossible: true,
        };
        spec.validate().unwrap();
        let bad = SensorSpec {
            min_detectable: 1000.0,
            max_detectable: 1000.0,
            ..spec
        };
        assert!(bad.validate().is_err());
    }
}
