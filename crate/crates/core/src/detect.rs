//! The sequential one-step-ahead detection loop.
//!
//! At each test timestep the fitted model forecasts the next value, wraps it
//! in a Student-t prediction interval, and flags the observation if it falls
//! outside. Two update policies differ in what enters the history state
//! afterwards: plain anomaly detection (AD) always absorbs the actual
//! observation, while anomaly detection and mitigation (ADAM) substitutes
//! the forecast for any interval-flagged observation so a single bad reading
//! cannot poison the next forecast — at the price of runaway flagging when
//! the level genuinely shifts.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::forecast::{ForecastEngine, ForecastModel, ModelKind, Transform};
use crate::rules::RuleFinding;
use crate::series::{DetectorConfig, SeriesFrame, Timestamp};
use crate::stats;

/// A symmetric Student-t prediction interval around a forecast.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionInterval {
    /// Lower bound (inclusive).
    pub lower: f64,
    /// Upper bound (inclusive).
    pub upper: f64,
    /// The forecast at the interval's center.
    pub center: f64,
    /// Two-sided significance level the interval was built for.
    pub alpha: f64,
}

/// Build the `100(1−alpha)%` prediction interval around `center` using the
/// model's residual scale and training degrees of freedom.
pub fn prediction_interval(
    model: &ForecastModel,
    center: f64,
    alpha: f64,
) -> Result<PredictionInterval> {
    let dof = model.dof()?;
    let t_crit = stats::student_t_critical(alpha, dof)?;
    Ok(interval_with_scale(center, alpha, t_crit, model.s))
}

/// Interval construction shared by the public operation and the detection
/// loop (which precomputes the t quantile once).
fn interval_with_scale(center: f64, alpha: f64, t_crit: f64, s: f64) -> PredictionInterval {
    let half_width = t_crit * s;
    PredictionInterval {
        lower: center - half_width,
        upper: center + half_width,
        center,
        alpha,
    }
}

/// True when the observation falls outside the interval. The bounds belong
/// to the interval: an observation exactly on a bound is normal.
pub fn classify_observation(observed: f64, pi: &PredictionInterval) -> bool {
    observed < pi.lower || observed > pi.upper
}

/// History-update policy of the detection loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionMode {
    /// The actual observation always enters the history state.
    Ad,
    /// Interval-flagged observations are replaced by their forecast in the
    /// history state.
    Adam,
}

impl std::fmt::Display for DetectionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DetectionMode::Ad => "AD",
            DetectionMode::Adam => "ADAM",
        })
    }
}

/// Why a trace record is flagged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlagSource {
    /// A deterministic classification rule claimed the timestamp.
    Rule,
    /// The observation fell outside its prediction interval.
    Pi,
}

impl std::fmt::Display for FlagSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FlagSource::Rule => "rule",
            FlagSource::Pi => "pi",
        })
    }
}

/// One timestep of a detection run. All values are on the model's
/// transformed scale.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Timestamp of the observation.
    pub timestamp: Timestamp,
    /// Observed value (transformed scale).
    pub observed: f64,
    /// What entered the history state: the observation, or its forecast
    /// when ADAM substituted it.
    pub used_value: f64,
    /// One-step-ahead forecast; absent during warmup.
    pub forecast: Option<f64>,
    /// Prediction interval around the forecast; absent during warmup.
    pub pi: Option<PredictionInterval>,
    /// Whether this timestep is flagged (by rule or interval).
    pub flagged: bool,
    /// What flagged it; `None` when unflagged.
    pub source: Option<FlagSource>,
}

/// Full record of one detection run over one series.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionTrace {
    /// Variable the run was over.
    pub variable: String,
    /// History-update policy used.
    pub mode: DetectionMode,
    /// Per-timestep records in time order.
    pub records: Vec<TraceRecord>,
}

impl DetectionTrace {
    /// Timestamps of all flagged records.
    pub fn flagged_timestamps(&self) -> Vec<Timestamp> {
        self.records
            .iter()
            .filter(|r| r.flagged)
            .map(|r| r.timestamp)
            .collect()
    }
}

/// Run the sequential detection loop over a frame.
///
/// The frame's raw values are transformed to the model's training scale
/// internally (nonpositive values must have been sanitized away first). For
/// the difference-of-logs transform the first observation seeds the
/// transform and produces no record. Covariates must be supplied for (and
/// only for) models with regression coefficients, one row per observation.
///
/// Rule findings take precedence over interval flags: a rule-claimed
/// timestamp is flagged with the rule as its source and never double-counted
/// as an interval flag. Rule flags do not trigger ADAM substitution; only
/// interval flags do.
pub fn run_detection(
    frame: &SeriesFrame,
    model: &ForecastModel,
    mode: DetectionMode,
    rule_findings: &[RuleFinding],
    covariates: Option<&[Vec<f64>]>,
    config: &DetectorConfig,
) -> Result<DetectionTrace> {
    config.validate()?;
    model.validate()?;
    frame.ensure_time_ordered()?;

    // Transform to the model's training scale.
    let mut logs = Vec::with_capacity(frame.len());
    for obs in &frame.observations {
        if !(obs.value > 0.0) || !obs.value.is_finite() {
            return Err(Error::Transform(format!(
                "value {} at {} cannot enter a log transform; sanitize the frame first",
                obs.value, obs.timestamp
            )));
        }
        logs.push(obs.value.ln());
    }
    let (step_times, ys): (Vec<Timestamp>, Vec<f64>) = match model.training_transform {
        Transform::Log => (frame.timestamps(), logs),
        Transform::DiffLog => {
            if model.kind == ModelKind::RegArima {
                return Err(Error::InvalidConfig(
                    "covariate models run on the log scale, not differenced logs".into(),
                ));
            }
            let times = frame.timestamps().split_off(1);
            let diffs = logs.windows(2).map(|pair| pair[1] - pair[0]).collect();
            (times, diffs)
        }
    };

    // Regression parts, one per step, for covariate models.
    let reg_parts: Option<Vec<f64>> = match (model.kind, covariates) {
        (ModelKind::RegArima, Some(rows)) => {
            if rows.len() != frame.len() {
                return Err(Error::Alignment(format!(
                    "frame has {} observations but {} covariate rows were given",
                    frame.len(),
                    rows.len()
                )));
            }
            Some(
                rows.iter()
                    .map(|row| model.regression_part(row))
                    .collect::<Result<_>>()?,
            )
        }
        (ModelKind::RegArima, None) => {
            return Err(Error::MissingCovariate(
                "covariate model needs one covariate row per observation".into(),
            ))
        }
        (_, Some(_)) => {
            return Err(Error::InvalidConfig(
                "covariates supplied to a model without regression coefficients".into(),
            ))
        }
        (_, None) => None,
    };

    // Interval machinery, fixed for the whole run.
    let dof = model.dof()?;
    let t_crit = stats::student_t_critical(config.alpha, dof)?;
    let s_eff = model.s.max(config.s_floor);

    let rule_set: BTreeSet<Timestamp> = rule_findings.iter().map(|f| f.timestamp).collect();

    let mut engine = ForecastEngine::new(model);
    let mut records = Vec::with_capacity(ys.len());
    for (i, (&ts, &y)) in step_times.iter().zip(&ys).enumerate() {
        let reg = reg_parts.as_ref().map_or(0.0, |parts| parts[i]);
        let observed_state = y - reg;
        let rule_flagged = rule_set.contains(&ts);
        if let Some(state_forecast) = engine.forecast() {
            let forecast = state_forecast + reg;
            let pi = interval_with_scale(forecast, config.alpha, t_crit, s_eff);
            let pi_flagged = classify_observation(y, &pi);
            let substituted = mode == DetectionMode::Adam && pi_flagged;
            engine.push(if substituted {
                state_forecast
            } else {
                observed_state
            });
            let source = if rule_flagged {
                Some(FlagSource::Rule)
            } else if pi_flagged {
                Some(FlagSource::Pi)
            } else {
                None
            };
            records.push(TraceRecord {
                timestamp: ts,
                observed: y,
                used_value: if substituted { forecast } else { y },
                forecast: Some(forecast),
                pi: Some(pi),
                flagged: rule_flagged || pi_flagged,
                source,
            });
        } else {
            // Warmup: no forecast yet, the observation simply enters the
            // state. Rules can still flag these records.
            engine.push(observed_state);
            records.push(TraceRecord {
                timestamp: ts,
                observed: y,
                used_value: y,
                forecast: None,
                pi: None,
                flagged: rule_flagged,
                source: rule_flagged.then_some(FlagSource::Rule),
            });
        }
    }

    Ok(DetectionTrace {
        variable: frame.name.clone(),
        mode,
        records,
    })
}
