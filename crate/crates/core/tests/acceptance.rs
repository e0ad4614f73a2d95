//! Acceptance checklist for the detection stack.
//!
//! Each test covers one item of the release checklist and prints exactly one
//! summary line (visible with `cargo test --test acceptance -- --nocapture`),
//! including its runtime against a pinned budget. The tests use their own
//! simulators and fixtures so they stay independent of the crate's internal
//! test helpers.

use std::collections::BTreeSet;
use std::time::Instant;

use chrono::{Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use streamflag_core::detect::{run_detection, DetectionMode};
use streamflag_core::evaluate::{metrics, round_metric, ConfusionMatrix};
use streamflag_core::features::{
    hdoutliers_detect, knn_detect, knn_distances, knn_distances_brute, normalize_columns,
    transform_derivative, FeatureMatrix, KnnVariant,
};
use streamflag_core::forecast::{fit_arima, fit_linear_ar, fit_naive, ljung_box};
use streamflag_core::rules::run_rules;
use streamflag_core::series::{
    DetectorConfig, Observation, SensorSpec, SeriesFrame, Timestamp, TypeCode,
};
use streamflag_core::synth::{
    generate_base, inject, BaseKind, BaseParams, Injection, InjectionPlan,
};

/// Run one checklist item, print its single summary line, and panic on
/// failure or time-budget overrun so the suite stays red when an item is.
fn checklist(name: &str, budget_seconds: f64, body: impl FnOnce() -> Result<String, String>) {
    let started = Instant::now();
    let outcome = body();
    let elapsed = started.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) if elapsed <= budget_seconds => {
            println!("[acceptance] {name}: PASS ({elapsed:.2}s; {detail})");
        }
        Ok(detail) => {
            println!(
                "[acceptance] {name}: FAIL (over time budget: {elapsed:.2}s > {budget_seconds}s; {detail})"
            );
            panic!("{name} exceeded its {budget_seconds}s budget ({elapsed:.2}s)");
        }
        Err(why) => {
            println!("[acceptance] {name}: FAIL ({why})");
            panic!("{name}: {why}");
        }
    }
}

fn start_time() -> Timestamp {
    Utc.with_ymd_and_hms(2021, 3, 1, 0, 0, 0).unwrap()
}

fn quarter_hours(n: usize) -> Vec<Timestamp> {
    let t0 = start_time();
    (0..n).map(|i| t0 + Duration::minutes(15 * i as i64)).collect()
}

/// Positive-valued frame whose log follows the given series.
fn frame_from_logs(logs: &[f64]) -> SeriesFrame {
    let observations = quarter_hours(logs.len())
        .into_iter()
        .zip(logs)
        .map(|(ts, &x)| Observation::new(ts, x.exp()))
        .collect();
    SeriesFrame::unlabelled("synthetic", observations).expect("time-ordered observations")
}

/// Gaussian random walk, the suite's own implementation.
fn random_walk(start: f64, sigma: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = Normal::new(0.0, sigma).expect("positive sigma");
    let mut level = start;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        level += step.sample(&mut rng);
        out.push(level);
    }
    out
}

/// ARMA simulator with a 500-step burn-in, the suite's own implementation.
/// Sign convention: `x_t = c + Σ φ_i x_{t−i} + Σ θ_j ε_{t−j} + ε_t`.
fn simulate_arma(c: f64, phi: &[f64], theta: &[f64], sigma: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = Normal::new(0.0, sigma).expect("positive sigma");
    let burn = 500;
    let total = n + burn;
    let mut xs: Vec<f64> = Vec::with_capacity(total);
    let mut eps: Vec<f64> = Vec::with_capacity(total);
    for t in 0..total {
        let e: f64 = step.sample(&mut rng);
        let mut v = c + e;
        for (i, &ph) in phi.iter().enumerate() {
            if t > i {
                v += ph * xs[t - 1 - i];
            }
        }
        for (j, &th) in theta.iter().enumerate() {
            if t > j {
                v += th * eps[t - 1 - j];
            }
        }
        xs.push(v);
        eps.push(e);
    }
    xs.split_off(burn)
}

/// One reference-table row: confusion counts and the four expected
/// two-decimal metrics, `(tn, fn, fp, tp, accuracy, error, npv, ppv)`.
type MetricRow = (usize, usize, usize, usize, f64, f64, f64, f64);

/// True when the computed metric rounds to the expected two-decimal value.
/// `NAN` in a fixture marks an entry that must be undefined (`None`).
fn rounds_to(expected: f64, computed: Option<f64>) -> bool {
    match computed {
        None => expected.is_nan(),
        Some(v) => expected.is_finite() && (round_metric(v) - expected).abs() < 1e-9,
    }
}

/// Checklist item 1 — the metric formulas reproduce, to two-decimal
/// rounding, every row of the reference evaluation tables the detector
/// families were scored with.
#[test]
fn criterion_01_metric_formulas_reproduce_reference_tables() {
    checklist("01 metric formulas", 1.0, || {
        // Model-detector rows (plain and substitution modes at two sites,
        // three variables), NPV/PPV in formula orientation.
        //
        // One PPV entry is stated against its own counts rather than the
        // reference print: the row with counts (5398, 712, 151, 19) was
        // printed with PPV 0.04, but 19 / (19 + 151) rounds to 0.11. The
        // counts are authoritative; the print is a typo.
        const MODEL_ROWS: &[MetricRow] = &[
            (5416, 715, 133, 16, 0.86, 0.14, 0.88, 0.11),
            (347, 0, 5202, 731, 0.17, 0.83, 1.00, 0.12),
            (5398, 712, 151, 19, 0.86, 0.14, 0.88, 0.11),
            (4491, 25, 1058, 706, 0.83, 0.17, 0.99, 0.40),
            (5405, 711, 144, 20, 0.86, 0.14, 0.88, 0.12),
            (4465, 25, 1084, 706, 0.82, 0.18, 0.99, 0.39),
            (5344, 695, 205, 36, 0.86, 0.14, 0.88, 0.15),
            (171, 0, 5378, 731, 0.14, 0.86, 1.00, 0.12),
            (5759, 459, 2, 60, 0.93, 0.07, 0.93, 0.97),
            (4455, 399, 1306, 120, 0.73, 0.27, 0.92, 0.08),
            (5709, 453, 52, 66, 0.92, 0.08, 0.93, 0.56),
            (4256, 397, 1505, 122, 0.70, 0.30, 0.91, 0.07),
            (5756, 455, 5, 64, 0.93, 0.07, 0.93, 0.93),
            (1873, 0, 3888, 519, 0.38, 0.62, 1.00, 0.12),
            (5675, 437, 86, 82, 0.92, 0.08, 0.93, 0.49),
            (128, 0, 5633, 519, 0.10, 0.90, 1.00, 0.08),
            (4386, 859, 96, 61, 0.82, 0.18, 0.84, 0.39),
            (491, 134, 3991, 786, 0.24, 0.76, 0.79, 0.16),
            (4347, 830, 135, 90, 0.82, 0.18, 0.84, 0.40),
            (2178, 753, 2340, 167, 0.43, 0.57, 0.74, 0.07),
            (4348, 829, 134, 91, 0.82, 0.18, 0.84, 0.40),
            (2187, 751, 2295, 169, 0.44, 0.56, 0.74, 0.07),
            (4345, 820, 137, 100, 0.82, 0.18, 0.84, 0.42),
            (775, 81, 3707, 839, 0.30, 0.70, 0.91, 0.18),
            (5340, 0, 60, 2, 0.99, 0.01, 1.00, 0.03),
            (859, 0, 4541, 2, 0.16, 0.84, 1.00, 0.00),
            (5322, 0, 78, 2, 0.99, 0.01, 1.00, 0.03),
            (3988, 0, 1412, 2, 0.74, 0.26, 1.00, 0.00),
            (5361, 0, 39, 2, 0.99, 0.01, 1.00, 0.05),
            (3994, 0, 1406, 2, 0.74, 0.26, 1.00, 0.00),
            (5284, 0, 116, 2, 0.98, 0.02, 1.00, 0.02),
            (309, 0, 5091, 2, 0.06, 0.94, 1.00, 0.00),
        ];

        // Feature-detector rows. Their source tables print the NPV and PPV
        // columns swapped, on every row, so the expectations here are the
        // printed columns and the assertion crosses them: the printed "NPV"
        // must equal the PPV formula and vice versa. A `NAN` records a
        // printed "n/a" (the formula is undefined when nothing is flagged).
        const FEATURE_ROWS: &[MetricRow] = &[
            (5548, 728, 1, 3, 0.88, 0.12, 0.75, 0.88),
            (5547, 727, 2, 4, 0.88, 0.12, 0.67, 0.88),
            (5542, 725, 7, 6, 0.88, 0.12, 0.46, 0.88),
            (5546, 728, 3, 3, 0.88, 0.12, 0.50, 0.88),
            (5547, 728, 2, 3, 0.88, 0.12, 0.60, 0.88),
            (5546, 728, 3, 3, 0.88, 0.12, 0.50, 0.88),
            (5758, 470, 3, 49, 0.92, 0.08, 0.94, 0.92),
            (5758, 479, 3, 40, 0.92, 0.08, 0.93, 0.92),
            (5759, 472, 2, 47, 0.92, 0.08, 0.96, 0.92),
            (5758, 479, 3, 40, 0.92, 0.08, 0.93, 0.92),
            (5760, 471, 1, 48, 0.92, 0.08, 0.98, 0.92),
            (5759, 479, 2, 40, 0.92, 0.08, 0.95, 0.92),
            (4477, 914, 5, 6, 0.83, 0.17, 0.55, 0.83),
            (4481, 917, 1, 3, 0.83, 0.17, 0.75, 0.83),
            (4477, 914, 5, 6, 0.83, 0.17, 0.55, 0.83),
            (4471, 912, 11, 8, 0.83, 0.17, 0.42, 0.83),
            (4482, 920, 0, 0, 0.83, 0.17, f64::NAN, 0.83),
            (4480, 917, 2, 3, 0.83, 0.17, 0.60, 0.83),
            (5398, 1, 2, 1, 1.00, 0.00, 0.33, 1.00),
            (5399, 1, 1, 1, 1.00, 0.00, 0.50, 1.00),
            (5395, 1, 5, 1, 1.00, 0.00, 0.17, 1.00),
            (5367, 1, 33, 1, 0.99, 0.01, 0.03, 1.00),
            (5396, 1, 4, 1, 1.00, 0.00, 0.20, 1.00),
            (5367, 1, 33, 1, 0.99, 0.01, 0.03, 1.00),
        ];

        let mut checked = 0usize;
        for (row, &(tn, fn_, fp, tp, acc, err, npv, ppv)) in MODEL_ROWS.iter().enumerate() {
            let report = metrics(&ConfusionMatrix {
                true_positives: tp,
                false_positives: fp,
                true_negatives: tn,
                false_negatives: fn_,
            })
            .map_err(|e| format!("model row {row}: {e}"))?;
            if !rounds_to(acc, Some(report.accuracy))
                || !rounds_to(err, Some(report.error_rate))
                || !rounds_to(npv, report.npv)
                || !rounds_to(ppv, report.ppv)
            {
                return Err(format!(
                    "model row {row} (tn {tn}, fn {fn_}, fp {fp}, tp {tp}) does not reproduce \
                     acc {acc} / err {err} / npv {npv} / ppv {ppv}"
                ));
            }
            checked += 1;
        }
        for (row, &(tn, fn_, fp, tp, acc, err, printed_npv, printed_ppv)) in
            FEATURE_ROWS.iter().enumerate()
        {
            let report = metrics(&ConfusionMatrix {
                true_positives: tp,
                false_positives: fp,
                true_negatives: tn,
                false_negatives: fn_,
            })
            .map_err(|e| format!("feature row {row}: {e}"))?;
            let swapped = rounds_to(printed_npv, report.ppv) && rounds_to(printed_ppv, report.npv);
            if !rounds_to(acc, Some(report.accuracy))
                || !rounds_to(err, Some(report.error_rate))
                || !swapped
            {
                return Err(format!(
                    "feature row {row} (tn {tn}, fn {fn_}, fp {fp}, tp {tp}) does not reproduce \
                     acc {acc} / err {err} / swapped npv {printed_npv} / ppv {printed_ppv}"
                ));
            }
            checked += 1;
        }
        Ok(format!(
            "{checked} table rows reproduced (incl. the swapped-column set)"
        ))
    });
}

/// Checklist item 2 — the deterministic rules find every injected
/// impossible value, out-of-range value, and post-gap observation, with no
/// false positives, across 100 random synthetic frames.
#[test]
fn criterion_02_rules_catch_every_injected_hard_anomaly() {
    checklist("02 rule completeness", 10.0, || {
        let config = DetectorConfig::default();
        let sensor = SensorSpec {
            variable: "synthetic".into(),
            min_detectable: 0.0,
            max_detectable: 1.0e6,
            zero_is_impossible: true,
        };
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0002 ^ (seed.wrapping_mul(0x9E37)));
            let n = 400;
            // Disjoint windows keep the three injections from overlapping.
            let plan = InjectionPlan {
                base_kind: BaseKind::RandomWalk,
                base_params: BaseParams {
                    level: 3.0,
                    drift: 0.0,
                    sigma: 0.05,
                    ..Default::default()
                },
                n,
                seed,
                injections: vec![
                    Injection {
                        type_code: TypeCode::F,
                        start_index: rng.random_range(10..90),
                        length: rng.random_range(1..=3),
                        magnitude: 5.0,
                    },
                    Injection {
                        type_code: TypeCode::G,
                        start_index: rng.random_range(120..200),
                        length: rng.random_range(1..=2),
                        magnitude: 2.0e6,
                    },
                    Injection {
                        type_code: TypeCode::K,
                        start_index: rng.random_range(240..320),
                        // Deleting 12 quarter-hour points leaves a 195-minute
                        // hole, just past the 180-minute gap threshold.
                        length: rng.random_range(12..=20),
                        magnitude: 0.0,
                    },
                ],
            };
            let base = generate_base(plan.base_kind, &plan.base_params, plan.n, plan.seed)
                .map_err(|e| format!("seed {seed}: {e}"))?;
            let frame = inject(&base, &plan).map_err(|e| format!("seed {seed}: {e}"))?;
            let findings = run_rules(&frame, &sensor, &config)
                .map_err(|e| format!("seed {seed}: {e}"))?;

            let found: BTreeSet<(Timestamp, TypeCode)> = findings
                .iter()
                .map(|f| (f.timestamp, f.type_code))
                .collect();
            let expected: BTreeSet<(Timestamp, TypeCode)> = frame
                .labels
                .iter()
                .map(|(ts, label)| (*ts, label.type_code))
                .collect();
            if found != expected {
                return Err(format!(
                    "seed {seed}: rules returned {} findings, ground truth has {} \
                     (missed {:?}, extra {:?})",
                    found.len(),
                    expected.len(),
                    expected.difference(&found).collect::<Vec<_>>(),
                    found.difference(&expected).collect::<Vec<_>>(),
                ));
            }
        }
        Ok("100 frames, injected findings matched exactly with zero false positives".into())
    });
}

/// Checklist item 3 — on an anomaly-free random walk scored by a matched
/// naive model, the 99% prediction interval flags close to 1% of the
/// observations.
#[test]
fn criterion_03_interval_flag_rate_is_calibrated() {
    checklist("03 interval calibration", 5.0, || {
        let sigma = 0.05;
        let logs = random_walk(3.0, sigma, 11_000, 0xACCE_0003);
        let (train, test) = logs.split_at(1_000);
        let model = fit_naive(train).map_err(|e| e.to_string())?;
        let frame = frame_from_logs(test);
        let config = DetectorConfig::default();
        let trace = run_detection(&frame, &model, DetectionMode::Ad, &[], None, &config)
            .map_err(|e| e.to_string())?;
        let evaluated = trace.records.iter().filter(|r| r.pi.is_some()).count();
        let flagged = trace.records.iter().filter(|r| r.flagged).count();
        if evaluated < 9_999 {
            return Err(format!("only {evaluated} records carry an interval"));
        }
        let rate = flagged as f64 / evaluated as f64;
        if !(0.002..=0.03).contains(&rate) {
            return Err(format!(
                "flag rate {rate:.4} outside [0.002, 0.03] at alpha 0.01"
            ));
        }
        Ok(format!(
            "flag rate {rate:.4} over {evaluated} clean observations at alpha 0.01"
        ))
    });
}

/// Checklist item 4 — the least-squares and conditional-sum-of-squares
/// estimators recover known AR(1) and MA(1) coefficients from simulations
/// within a 0.05 mean absolute error over 20 seeds.
#[test]
fn criterion_04_ar_and_ma_coefficients_recovered_from_simulation() {
    checklist("04 estimator recovery", 60.0, || {
        let seeds = 20u64;
        let n = 5_000;
        let mut ar_abs_err = 0.0;
        let mut ma_abs_err = 0.0;
        for seed in 0..seeds {
            let ar_series = simulate_arma(0.0, &[0.8], &[], 1.0, n, 0xACCE_0004 + seed);
            let linear = fit_linear_ar(&ar_series, 1)
                .map_err(|e| format!("AR seed {seed}: {e}"))?;
            ar_abs_err += (linear.phi[0] - 0.8).abs();

            let ma_series = simulate_arma(0.0, &[], &[0.6], 1.0, n, 0xBEEF_0004 + seed);
            let (arima, _) = fit_arima(&ma_series, 0, 0, 1)
                .map_err(|e| format!("MA seed {seed}: {e}"))?;
            ma_abs_err += (arima.theta[0] - 0.6).abs();
        }
        let ar_mae = ar_abs_err / seeds as f64;
        let ma_mae = ma_abs_err / seeds as f64;
        if ar_mae > 0.05 || ma_mae > 0.05 {
            return Err(format!(
                "MAE over {seeds} seeds: AR(1) {ar_mae:.4}, MA(1) {ma_mae:.4} (budget 0.05)"
            ));
        }
        Ok(format!(
            "MAE over {seeds} seeds of n = {n}: AR(1) {ar_mae:.4}, MA(1) {ma_mae:.4}"
        ))
    });
}

/// Checklist item 5 — structural equivalences between the model families:
/// an integrated model with no AR/MA terms is the naive forecaster, and a
/// pure AR model matches the least-squares autoregression.
#[test]
fn criterion_05_model_family_equivalences_hold() {
    checklist("05 model equivalences", 30.0, || {
        let walk = random_walk(2.0, 0.4, 600, 0xACCE_0005);
        let naive = fit_naive(&walk).map_err(|e| e.to_string())?;
        let (integrated, _) = fit_arima(&walk, 0, 1, 0).map_err(|e| e.to_string())?;
        let s_gap = (integrated.s - naive.s).abs();
        if s_gap > 1e-12 {
            return Err(format!(
                "integrated scale {} differs from naive scale {} by {s_gap:e}",
                integrated.s, naive.s
            ));
        }

        for (p, phi_true) in [(1usize, vec![0.7]), (2, vec![0.5, 0.25])] {
            let series = simulate_arma(0.3, &phi_true, &[], 1.0, 4_000, 0xACCE_0005 ^ p as u64);
            let linear = fit_linear_ar(&series, p).map_err(|e| format!("p = {p}: {e}"))?;
            let (arima, _) = fit_arima(&series, p, 0, 0).map_err(|e| format!("p = {p}: {e}"))?;
            for i in 0..p {
                let gap = (arima.phi[i] - linear.phi[i]).abs();
                if gap > 1e-3 {
                    return Err(format!(
                        "p = {p}: AR coefficient {i} differs by {gap:.2e} \
                         ({} vs least-squares {})",
                        arima.phi[i], linear.phi[i]
                    ));
                }
            }
            let constant_gap = (arima.constant - linear.constant).abs();
            if constant_gap > 1e-3 {
                return Err(format!(
                    "p = {p}: constants differ by {constant_gap:.2e} \
                     ({} vs least-squares {})",
                    arima.constant, linear.constant
                ));
            }
        }
        Ok("integrated scale matches naive to 1e-12; pure-AR fits match least squares to 1e-3"
            .into())
    });
}

/// Checklist item 6 — on a level shift, forecast substitution keeps
/// flagging for at least as long as plain detection, while plain detection
/// absorbs the shift and stops flagging within three steps.
#[test]
fn criterion_06_substitution_extends_level_shift_flagging() {
    checklist("06 substitution contiguity", 5.0, || {
        let n = 400;
        let shift_start = 200;
        let shift_len = 25;
        let plan = InjectionPlan {
            base_kind: BaseKind::RandomWalk,
            base_params: BaseParams {
                level: 3.0,
                drift: 0.0,
                sigma: 0.02,
                ..Default::default()
            },
            n,
            seed: 0xACCE_0006,
            injections: vec![Injection {
                type_code: TypeCode::D,
                start_index: shift_start,
                length: shift_len,
                magnitude: 30.0,
            }],
        };
        let base = generate_base(plan.base_kind, &plan.base_params, plan.n, plan.seed)
            .map_err(|e| e.to_string())?;
        let frame = inject(&base, &plan).map_err(|e| e.to_string())?;
        // The first 150 observations are untouched by the injection.
        let train: Vec<f64> = frame.observations[..150]
            .iter()
            .map(|o| o.value.ln())
            .collect();
        let model = fit_naive(&train).map_err(|e| e.to_string())?;
        let config = DetectorConfig::default();
        let shift_ts = frame.observations[shift_start].timestamp;

        let contiguous_run = |mode: DetectionMode| -> Result<usize, String> {
            let trace = run_detection(&frame, &model, mode, &[], None, &config)
                .map_err(|e| e.to_string())?;
            let onset = trace
                .records
                .iter()
                .position(|r| r.timestamp == shift_ts)
                .ok_or_else(|| "shift onset missing from the trace".to_string())?;
            Ok(trace.records[onset..]
                .iter()
                .take_while(|r| r.flagged)
                .count())
        };

        let plain = contiguous_run(DetectionMode::Ad)?;
        let substituted = contiguous_run(DetectionMode::Adam)?;
        if plain == 0 {
            return Err("the shift onset was not flagged at all".into());
        }
        if substituted < plain {
            return Err(format!(
                "substitution run ({substituted}) is shorter than the plain run ({plain})"
            ));
        }
        if plain > 3 {
            return Err(format!(
                "plain detection took {plain} steps to re-adapt (budget 3)"
            ));
        }
        Ok(format!(
            "contiguous flag runs over a {shift_len}-step shift: plain {plain}, substitution {substituted}"
        ))
    });
}

/// Checklist item 7 — the kd-tree neighbour search returns exactly the
/// same distances as the exhaustive pairwise scan on random matrices.
#[test]
fn criterion_07_kdtree_matches_brute_force_exactly() {
    checklist("07 nearest-neighbour exactness", 30.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0007);
        for case in 0..50 {
            let n = rng.random_range(20..=500);
            let dim = rng.random_range(1..=5);
            let k = rng.random_range(1..=10.min(n - 1));
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
                .collect();
            let names = (0..dim).map(|c| format!("f{c}")).collect();
            let matrix = FeatureMatrix::new(names, quarter_hours(n), rows)
                .map_err(|e| format!("case {case}: {e}"))?;
            let tree = knn_distances(&matrix, k).map_err(|e| format!("case {case}: {e}"))?;
            let scan =
                knn_distances_brute(&matrix, k).map_err(|e| format!("case {case}: {e}"))?;
            if tree != scan {
                return Err(format!(
                    "case {case} (n {n}, dim {dim}, k {k}): kd-tree disagrees with the scan"
                ));
            }
        }
        Ok("50 random matrices: kd-tree equals the pairwise scan bit-for-bit".into())
    });
}

/// Checklist item 8 — all three feature-space detectors flag a planted
/// 10-sigma spike through the derivative transform, and none of them flags
/// more than the extreme-value tail share of a clean frame.
#[test]
fn criterion_08_feature_detectors_hit_planted_spike() {
    checklist("08 feature-detector targeting", 10.0, || {
        let n = 500;
        let spike_at = 260;
        let sigma = 0.05;
        let params = BaseParams {
            level: 3.0,
            drift: 0.0,
            sigma,
            ..Default::default()
        };
        let base_a = generate_base(BaseKind::RandomWalk, &params, n, 0xACCE_0008)
            .map_err(|e| e.to_string())?;
        let base_b = generate_base(BaseKind::RandomWalk, &params, n, 0xACCE_0009)
            .map_err(|e| e.to_string())?;
        let spiked_a = inject(
            &base_a,
            &InjectionPlan {
                base_kind: BaseKind::RandomWalk,
                base_params: params,
                n,
                seed: 0xACCE_0008,
                injections: vec![Injection {
                    type_code: TypeCode::A,
                    start_index: spike_at,
                    length: 1,
                    magnitude: 10.0,
                }],
            },
        )
        .map_err(|e| e.to_string())?;

        let config = DetectorConfig::default();
        let matrix_of = |a: &SeriesFrame, b: &SeriesFrame| -> Result<FeatureMatrix, String> {
            let log_a: Vec<f64> = a.observations.iter().map(|o| o.value.ln()).collect();
            let log_b: Vec<f64> = b.observations.iter().map(|o| o.value.ln()).collect();
            let da = transform_derivative(&log_a).map_err(|e| e.to_string())?;
            let db = transform_derivative(&log_b).map_err(|e| e.to_string())?;
            let rows = da
                .iter()
                .zip(&db)
                .map(|(&x, &y)| vec![x, y])
                .collect::<Vec<_>>();
            let matrix = FeatureMatrix::new(
                vec!["a-derivative".into(), "b-derivative".into()],
                a.observations.iter().map(|o| o.timestamp).collect(),
                rows,
            )
            .map_err(|e| e.to_string())?;
            normalize_columns(&matrix).map_err(|e| e.to_string())
        };

        let spiked = matrix_of(&spiked_a, &base_b)?;
        let clean = matrix_of(&base_a, &base_b)?;

        type Detector<'a> = Box<dyn Fn(&FeatureMatrix) -> Result<BTreeSet<usize>, String> + 'a>;
        let detectors: [(&str, Detector<'_>); 3] = [
            (
                "cluster-spacing",
                Box::new(|m| {
                    hdoutliers_detect(m, &config)
                        .map(|s| s.flagged)
                        .map_err(|e| e.to_string())
                }),
            ),
            (
                "knn-agg",
                Box::new(|m| {
                    knn_detect(m, config.k_neighbours, KnnVariant::Agg, &config)
                        .map(|s| s.flagged)
                        .map_err(|e| e.to_string())
                }),
            ),
            (
                "knn-sum",
                Box::new(|m| {
                    knn_detect(m, config.k_neighbours, KnnVariant::Sum, &config)
                        .map(|s| s.flagged)
                        .map_err(|e| e.to_string())
                }),
            ),
        ];

        // The central difference spreads an isolated spike onto the rows
        // either side of it, so any of the three neighbouring rows counts
        // as hitting the event.
        let spike_rows: BTreeSet<usize> = [spike_at - 1, spike_at, spike_at + 1].into();
        let mut clean_rates = Vec::new();
        for (name, detect) in &detectors {
            let hits = detect(&spiked)?;
            if hits.is_disjoint(&spike_rows) {
                return Err(format!("{name} missed the planted 10-sigma spike"));
            }
            let clean_hits = detect(&clean)?;
            let rate = clean_hits.len() as f64 / n as f64;
            if rate > config.evt_alpha {
                return Err(format!(
                    "{name} flags {rate:.3} of a clean frame (budget {})",
                    config.evt_alpha
                ));
            }
            clean_rates.push(format!("{name} {rate:.3}"));
        }
        Ok(format!(
            "all three detectors hit the spike; clean-frame flag rates: {}",
            clean_rates.join(", ")
        ))
    });
}

/// Checklist item 9 — portmanteau p-values computed on white noise are
/// uniform: a Kolmogorov–Smirnov test over 1000 replicates stays under the
/// 1% critical value.
#[test]
fn criterion_09_portmanteau_pvalues_uniform_on_white_noise() {
    checklist("09 portmanteau calibration", 60.0, || {
        let replicates = 1_000usize;
        let n = 500;
        let lags = 10;
        let mut pvalues = Vec::with_capacity(replicates);
        for i in 0..replicates as u64 {
            let noise = simulate_arma(0.0, &[], &[], 1.0, n, 0xACCE_0009 ^ (i * 7_919));
            let (_q, p) = ljung_box(&noise, lags, 0).map_err(|e| format!("replicate {i}: {e}"))?;
            pvalues.push(p);
        }
        pvalues.sort_by(|a, b| a.total_cmp(b));
        let m = pvalues.len() as f64;
        let mut d = 0.0_f64;
        for (i, &p) in pvalues.iter().enumerate() {
            d = d.max(((i + 1) as f64 / m - p).max(p - i as f64 / m));
        }
        let d_crit = 1.628 / m.sqrt();
        if d > d_crit {
            return Err(format!(
                "KS statistic {d:.4} exceeds the 1% critical value {d_crit:.4}"
            ));
        }
        Ok(format!(
            "KS statistic {d:.4} < {d_crit:.4} over {replicates} white-noise replicates"
        ))
    });
}
