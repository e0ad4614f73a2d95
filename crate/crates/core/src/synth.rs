//! Synthetic series generation and anomaly injection.
//!
//! Real labelled sensor data is scarce, so tests and demos build their own:
//! a positive base series (an exponentiated Gaussian process) plus a plan
//! of injected anomalies, one per taxonomy type, each leaving ground-truth
//! labels behind. Magnitudes are expressed in multiples of the base
//! process's log-scale sigma so plans stay scale-free; the impossible-value
//! and out-of-range types take raw replacement values instead, since their
//! whole point is violating the physical scale.

use chrono::{TimeZone, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{AnomalyLabel, Observation, SeriesFrame, TypeCode};

/// Shape of the base log-scale process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseKind {
    /// Log-level follows a random walk with drift.
    RandomWalk,
    /// Log-level is a stationary first-order autoregression around a mean.
    Ar1,
    /// Log-level is a sinusoid plus trend plus white noise.
    Seasonal,
}

/// Parameters of the base process. Fields irrelevant to a kind are ignored
/// by it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaseParams {
    /// Starting (or mean) log-level.
    pub level: f64,
    /// Per-step log-level drift.
    pub drift: f64,
    /// Autoregressive coefficient (`ar1` kind), must lie in (−1, 1).
    pub phi: f64,
    /// Innovation standard deviation on the log scale.
    pub sigma: f64,
    /// Seasonal amplitude on the log scale (`seasonal` kind).
    pub season_amplitude: f64,
    /// Season length in steps (`seasonal` kind).
    pub season_period: usize,
}

impl Default for BaseParams {
    fn default() -> Self {
        Self {
            level: 3.0,
            drift: 0.0,
            phi: 0.8,
            sigma: 0.05,
            season_amplitude: 0.5,
            season_period: 96,
        }
    }
}

/// One anomaly to stamp into a base series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    /// Which taxonomy type to mimic.
    pub type_code: TypeCode,
    /// Index of the first affected observation in the base frame.
    pub start_index: usize,
    /// Number of affected observations (isolated types require 1).
    pub length: usize,
    /// Strength: multiples of the base log sigma for pattern anomalies, a
    /// raw replacement value for the impossible/out-of-range types.
    pub magnitude: f64,
}

impl Injection {
    fn end(&self) -> usize {
        self.start_index + self.length
    }
}

/// A self-contained recipe: base process plus the anomalies to inject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionPlan {
    /// Base process shape.
    pub base_kind: BaseKind,
    /// Base process parameters.
    pub base_params: BaseParams,
    /// Series length.
    pub n: usize,
    /// Generator seed; the whole recipe is reproducible from it.
    pub seed: u64,
    /// Anomalies to stamp in, non-overlapping.
    pub injections: Vec<Injection>,
}

impl InjectionPlan {
    /// Check index bounds, overlaps, and per-type shape constraints.
    pub fn validate(&self) -> Result<()> {
        validate_base(self.base_kind, &self.base_params)?;
        if self.n == 0 {
            return Err(Error::InvalidConfig("series length must be positive".into()));
        }
        for inj in &self.injections {
            if inj.length == 0 {
                return Err(Error::InvalidConfig(format!(
                    "injection at index {} has zero length",
                    inj.start_index
                )));
            }
            if inj.end() > self.n {
                return Err(Error::InvalidConfig(format!(
                    "injection [{}, {}) exceeds series length {}",
                    inj.start_index,
                    inj.end(),
                    self.n
                )));
            }
            match inj.type_code {
                TypeCode::A | TypeCode::J if inj.length != 1 => {
                    return Err(Error::InvalidConfig(format!(
                        "isolated type {} must have length 1, got {}",
                        inj.type_code, inj.length
                    )));
                }
                TypeCode::F if !(inj.magnitude > 0.0) => {
                    return Err(Error::InvalidConfig(
                        "impossible-value injection needs a positive magnitude to negate".into(),
                    ));
                }
                TypeCode::K => {
                    // The label lands on the first observation after the
                    // deleted span; it must survive and stay unclaimed.
                    if inj.end() >= self.n {
                        return Err(Error::InvalidConfig(
                            "gap injection must leave a surviving observation after it".into(),
                        ));
                    }
                    if self.injections.iter().any(|other| {
                        !std::ptr::eq(other, inj)
                            && other.start_index <= inj.end()
                            && inj.end() < other.end()
                    }) {
                        return Err(Error::InvalidConfig(
                            "gap injection is immediately followed by another injection".into(),
                        ));
                    }
                }
                _ => {}
            }
        }
        let mut spans: Vec<(usize, usize)> =
            self.injections.iter().map(|i| (i.start_index, i.end())).collect();
        spans.sort_unstable();
        for pair in spans.windows(2) {
            if pair[1].0 < pair[0].1 {
                return Err(Error::InvalidConfig(format!(
                    "injections [{}, {}) and [{}, {}) overlap",
                    pair[0].0, pair[0].1, pair[1].0, pair[1].1
                )));
            }
        }
        Ok(())
    }
}

fn validate_base(kind: BaseKind, params: &BaseParams) -> Result<()> {
    if !(params.sigma >= 0.0) || !params.sigma.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "sigma must be finite and non-negative, got {}",
            params.sigma
        )));
    }
    if !params.level.is_finite() || !params.drift.is_finite() {
        return Err(Error::InvalidConfig("level and drift must be finite".into()));
    }
    match kind {
        BaseKind::Ar1 if params.phi.abs() >= 1.0 => Err(Error::InvalidConfig(format!(
            "autoregressive coefficient must lie in (-1, 1), got {}",
            params.phi
        ))),
        BaseKind::Seasonal if params.season_period == 0 => {
            Err(Error::InvalidConfig("season period must be positive".into()))
        }
        _ => Ok(()),
    }
}

/// Spacing of the synthetic record.
const STEP_MINUTES: i64 = 15;

/// Generate a reproducible positive base series of length `n`.
pub fn generate_base(kind: BaseKind, params: &BaseParams, n: usize, seed: u64) -> Result<SeriesFrame> {
    validate_base(kind, params)?;
    if n == 0 {
        return Err(Error::InvalidConfig("series length must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = |rng: &mut ChaCha8Rng| -> f64 {
        if params.sigma == 0.0 {
            0.0
        } else {
            Normal::new(0.0, params.sigma)
                .expect("sigma validated")
                .sample(rng)
        }
    };
    let mut logs = Vec::with_capacity(n);
    match kind {
        BaseKind::RandomWalk => {
            let mut x = params.level;
            for _ in 0..n {
                logs.push(x);
                x += params.drift + noise(&mut rng);
            }
        }
        BaseKind::Ar1 => {
            let mut u = 0.0;
            for _ in 0..200 {
                u = params.phi * u + noise(&mut rng);
            }
            for t in 0..n {
                u = params.phi * u + noise(&mut rng);
                logs.push(params.level + params.drift * t as f64 + u);
            }
        }
        BaseKind::Seasonal => {
            let period = params.season_period as f64;
            for t in 0..n {
                let phase = 2.0 * std::f64::consts::PI * (t as f64) / period;
                logs.push(
                    params.level
                        + params.drift * t as f64
                        + params.season_amplitude * phase.sin()
                        + noise(&mut rng),
                );
            }
        }
    }
    let start = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
    let observations = logs
        .iter()
        .enumerate()
        .map(|(t, &x)| {
            Observation::new(
                start + chrono::Duration::minutes(STEP_MINUTES * t as i64),
                x.exp(),
            )
        })
        .collect();
    SeriesFrame::unlabelled("synthetic", observations)
}

/// Stamp the plan's anomalies into a frame and attach ground-truth labels.
///
/// Pattern anomalies shift the log of the value; the impossible-value type
/// replaces the raw value with `−magnitude`, the out-of-range type with
/// `magnitude` itself. The gap type deletes its span and labels the first
/// surviving observation after it.
pub fn inject(frame: &SeriesFrame, plan: &InjectionPlan) -> Result<SeriesFrame> {
    plan.validate()?;
    if frame.len() != plan.n {
        return Err(Error::Alignment(format!(
            "plan describes {} observations but the frame has {}",
            plan.n,
            frame.len()
        )));
    }
    let sigma = plan.base_params.sigma;
    let mut observations = frame.observations.clone();
    let mut labels = std::collections::BTreeMap::new();
    let mut deleted: Vec<(usize, usize)> = Vec::new();

    let mut label_at = |obs: &[Observation], index: usize, code: TypeCode| {
        labels.insert(obs[index].timestamp, AnomalyLabel::ground_truth(code));
    };

    for inj in &plan.injections {
        let span = inj.start_index..inj.end();
        let shift = inj.magnitude * sigma;
        match inj.type_code {
            TypeCode::A | TypeCode::J => {
                let v = &mut observations[inj.start_index].value;
                *v *= shift.exp();
                label_at(&observations, inj.start_index, inj.type_code);
            }
            TypeCode::B => {
                let frozen = observations[inj.start_index].value;
                for i in span {
                    observations[i].value = frozen;
                    label_at(&observations, i, TypeCode::B);
                }
            }
            TypeCode::C | TypeCode::D => {
                for i in span {
                    observations[i].value *= shift.exp();
                    label_at(&observations, i, inj.type_code);
                }
            }
            TypeCode::E => {
                for (k, i) in span.enumerate() {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    observations[i].value *= (sign * shift).exp();
                    label_at(&observations, i, TypeCode::E);
                }
            }
            TypeCode::F => {
                for i in span {
                    observations[i].value = -inj.magnitude;
                    label_at(&observations, i, TypeCode::F);
                }
            }
            TypeCode::G => {
                for i in span {
                    observations[i].value = inj.magnitude;
                    label_at(&observations, i, TypeCode::G);
                }
            }
            TypeCode::H => {
                let per_step = shift / inj.length as f64;
                for (k, i) in span.enumerate() {
                    observations[i].value *= (per_step * (k + 1) as f64).exp();
                    label_at(&observations, i, TypeCode::H);
                }
            }
            TypeCode::I => {
                for (k, i) in span.enumerate() {
                    if k % 2 == 0 {
                        observations[i].value *= shift.exp();
                    }
                    label_at(&observations, i, TypeCode::I);
                }
            }
            TypeCode::K => {
                deleted.push((inj.start_index, inj.end()));
                label_at(&observations, inj.end(), TypeCode::K);
            }
            TypeCode::L => {
                // A smooth out-of-pattern bump.
                let denom = (inj.length + 1) as f64;
                for (k, i) in span.enumerate() {
                    let bump = (std::f64::consts::PI * (k + 1) as f64 / denom).sin();
                    observations[i].value *= (shift * bump).exp();
                    label_at(&observations, i, TypeCode::L);
                }
            }
        }
    }

    let surviving: Vec<Observation> = observations
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !deleted.iter().any(|&(s, e)| s <= *i && *i < e))
        .map(|(_, obs)| obs)
        .collect();
    SeriesFrame::new(frame.name.clone(), surviving, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::run_rules;
    use crate::series::{DetectorConfig, SensorSpec};
    use crate::stats::sample_acf;

    fn plan(n: usize, injections: Vec<Injection>) -> InjectionPlan {
        InjectionPlan {
            base_kind: BaseKind::RandomWalk,
            base_params: BaseParams {
                sigma: 0.05,
                ..BaseParams::default()
            },
            n,
            seed: 7,
            injections,
        }
    }

    fn inj(type_code: TypeCode, start_index: usize, length: usize, magnitude: f64) -> Injection {
        Injection {
            type_code,
            start_index,
            length,
            magnitude,
        }
    }

    #[test]
    fn zero_sigma_autoregression_is_a_constant_series() {
        let params = BaseParams {
            level: 2.0,
            sigma: 0.0,
            drift: 0.0,
            ..BaseParams::default()
        };
        let frame = generate_base(BaseKind::Ar1, &params, 50, 1).unwrap();
        for v in frame.values() {
            assert_eq!(v, 2.0f64.exp());
        }
    }

    #[test]
    fn same_seed_reproduces_the_series_exactly() {
        let params = BaseParams::default();
        for kind in [BaseKind::RandomWalk, BaseKind::Ar1, BaseKind::Seasonal] {
            let a = generate_base(kind, &params, 300, 42).unwrap();
            let b = generate_base(kind, &params, 300, 42).unwrap();
            assert_eq!(a.values(), b.values());
            let c = generate_base(kind, &params, 300, 43).unwrap();
            assert_ne!(a.values(), c.values());
        }
    }

    #[test]
    fn ar1_logs_have_the_requested_autocorrelation() {
        let params = BaseParams {
            phi: 0.9,
            sigma: 0.05,
            drift: 0.0,
            ..BaseParams::default()
        };
        let frame = generate_base(BaseKind::Ar1, &params, 10_000, 5).unwrap();
        let logs: Vec<f64> = frame.values().iter().map(|v| v.ln()).collect();
        let acf = sample_acf(&logs, 1).unwrap();
        assert!((acf[0] - 0.9).abs() < 0.02, "lag-1 autocorrelation {}", acf[0]);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let mut params = BaseParams {
            phi: 1.0,
            ..BaseParams::default()
        };
        assert!(generate_base(BaseKind::Ar1, &params, 10, 0).is_err());
        params = BaseParams {
            sigma: -0.1,
            ..BaseParams::default()
        };
        assert!(generate_base(BaseKind::RandomWalk, &params, 10, 0).is_err());
        assert!(generate_base(BaseKind::RandomWalk, &BaseParams::default(), 0, 0).is_err());
    }

    #[test]
    fn isolated_spike_labels_exactly_one_observation() {
        let p = plan(100, vec![inj(TypeCode::A, 30, 1, 10.0)]);
        let base = generate_base(p.base_kind, &p.base_params, p.n, p.seed).unwrap();
        let injected = inject(&base, &p).unwrap();
        assert_eq!(injected.labels.len(), 1);
        let (&ts, label) = injected.labels.iter().next().unwrap();
        assert_eq!(label.type_code, TypeCode::A);
        assert_eq!(ts, base.observations[30].timestamp);
        // The spike is 10 sigma above the base value.
        let expected = base.observations[30].value * (10.0 * 0.05f64).exp();
        assert!((injected.observations[30].value - expected).abs() < 1e-12);
    }

    #[test]
    fn shift_span_labels_every_affected_observation() {
        let p = plan(100, vec![inj(TypeCode::D, 40, 12, 20.0)]);
        let base = generate_base(p.base_kind, &p.base_params, p.n, p.seed).unwrap();
        let injected = inject(&base, &p).unwrap();
        assert_eq!(injected.labels.len(), 12);
        for (i, obs) in injected.observations.iter().enumerate() {
            let labelled = injected.labels.contains_key(&obs.timestamp);
            assert_eq!(labelled, (40..52).contains(&i));
            if labelled {
                let ratio = (obs.value / base.observations[i].value).ln();
                assert!((ratio - 1.0).abs() < 1e-12, "shift is 20 x 0.05 = 1.0 in logs");
            }
        }
    }

    #[test]
    fn drift_span_slope_matches_the_plan() {
        let p = InjectionPlan {
            base_kind: BaseKind::Ar1,
            base_params: BaseParams {
                phi: 0.5,
                sigma: 0.05,
                drift: 0.0,
                ..BaseParams::default()
            },
            n: 200,
            seed: 11,
            injections: vec![inj(TypeCode::H, 100, 20, 40.0)],
        };
        let base = generate_base(p.base_kind, &p.base_params, p.n, p.seed).unwrap();
        let injected = inject(&base, &p).unwrap();
        // Regress the injected span's logs on the step index.
        let ys: Vec<f64> = injected.observations[100..120]
            .iter()
            .map(|o| o.value.ln())
            .collect();
        let rows: Vec<Vec<f64>> = (0..20).map(|k| vec![1.0, k as f64]).collect();
        let beta = crate::linalg::least_squares(&rows, &ys).unwrap();
        let expected_slope = 40.0 * 0.05 / 20.0;
        assert!(
            (beta[1] - expected_slope).abs() < 0.01,
            "slope {} vs {}",
            beta[1],
            expected_slope
        );
    }

    #[test]
    fn frozen_span_is_constant_and_oscillation_alternates() {
        let p = plan(
            120,
            vec![inj(TypeCode::B, 10, 8, 0.0), inj(TypeCode::E, 60, 6, 12.0)],
        );
        let base = generate_base(p.base_kind, &p.base_params, p.n, p.seed).unwrap();
        let injected = inject(&base, &p).unwrap();
        let frozen = injected.observations[10].value;
        for obs in &injected.observations[10..18] {
            assert_eq!(obs.value, frozen);
        }
        for (k, i) in (60..66).enumerate() {
            let ratio = (injected.observations[i].value / base.observations[i].value).ln();
            let expected = if k % 2 == 0 { 0.6 } else { -0.6 };
            assert!((ratio - expected).abs() < 1e-12);
        }
        assert_eq!(injected.labels.len(), 8 + 6);
    }

    #[test]
    fn gap_deletes_the_span_and_labels_the_next_survivor() {
        let p = plan(100, vec![inj(TypeCode::K, 20, 13, 0.0)]);
        let base = generate_base(p.base_kind, &p.base_params, p.n, p.seed).unwrap();
        let injected = inject(&base, &p).unwrap();
        assert_eq!(injected.len(), 100 - 13);
        assert_eq!(injected.labels.len(), 1);
        let (&ts, label) = injected.labels.iter().next().unwrap();
        assert_eq!(label.type_code, TypeCode::K);
        assert_eq!(ts, base.observations[33].timestamp);
        // The span is really gone.
        for i in 20..33 {
            assert!(!injected
                .observations
                .iter()
                .any(|o| o.timestamp == base.observations[i].timestamp));
        }
    }

    #[test]
    fn rules_find_all_injected_rule_detectable_anomalies_and_nothing_else() {
        let p = plan(
            500,
            vec![
                inj(TypeCode::F, 50, 2, 5.0),
                inj(TypeCode::G, 150, 3, 50_000.0),
                inj(TypeCode::K, 300, 13, 0.0),
            ],
        );
        let base = generate_base(p.base_kind, &p.base_params, p.n, p.seed).unwrap();
        let injected = inject(&base, &p).unwrap();
        let spec = SensorSpec {
            variable: "synthetic".into(),
            min_detectable: 0.0,
            max_detectable: 10_000.0,
            zero_is_impossible: false,
        };
        let findings = run_rules(&injected, &spec, &DetectorConfig::default()).unwrap();
        let found: std::collections::BTreeMap<_, _> = findings
            .iter()
            .map(|f| (f.timestamp, f.type_code))
            .collect();
        let expected: std::collections::BTreeMap<_, _> = injected
            .labels
            .iter()
            .map(|(&ts, l)| (ts, l.type_code))
            .collect();
        assert_eq!(found, expected, "rules must match the injected ground truth exactly");
    }

    #[test]
    fn label_count_equals_total_injected_length_with_gaps_counting_once() {
        let p = plan(
            400,
            vec![
                inj(TypeCode::A, 10, 1, 8.0),
                inj(TypeCode::D, 50, 5, 15.0),
                inj(TypeCode::K, 100, 13, 0.0),
                inj(TypeCode::H, 200, 8, 20.0),
                inj(TypeCode::L, 300, 4, 10.0),
            ],
        );
        let base = generate_base(p.base_kind, &p.base_params, p.n, p.seed).unwrap();
        let injected = inject(&base, &p).unwrap();
        assert_eq!(injected.labels.len(), 1 + 5 + 1 + 8 + 4);
    }

    #[test]
    fn overlapping_and_out_of_bounds_plans_are_rejected() {
        let overlap = plan(
            100,
            vec![inj(TypeCode::D, 10, 10, 5.0), inj(TypeCode::C, 15, 10, 5.0)],
        );
        assert!(matches!(overlap.validate(), Err(Error::InvalidConfig(_))));

        let oob = plan(100, vec![inj(TypeCode::D, 95, 10, 5.0)]);
        assert!(oob.validate().is_err());

        let long_spike = plan(100, vec![inj(TypeCode::A, 10, 3, 5.0)]);
        assert!(long_spike.validate().is_err());

        let gap_at_end = plan(100, vec![inj(TypeCode::K, 90, 10, 0.0)]);
        assert!(gap_at_end.validate().is_err());

        let gap_then_shift = plan(
            100,
            vec![inj(TypeCode::K, 20, 13, 0.0), inj(TypeCode::D, 33, 5, 5.0)],
        );
        assert!(gap_then_shift.validate().is_err());
    }

    #[test]
    fn plans_round_trip_through_json() {
        let p = plan(
            200,
            vec![inj(TypeCode::A, 10, 1, 8.0), inj(TypeCode::K, 50, 13, 0.0)],
        );
        let text = serde_json::to_string_pretty(&p).unwrap();
        let back: InjectionPlan = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
    }
}
