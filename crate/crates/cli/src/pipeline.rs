//! End-to-end orchestration: load the input, run the rules stage, train
//! and run each configured detector, score the results against the labels,
//! and write every output file.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use streamflag_core::detect::{run_detection, DetectionTrace, FlagSource};
use streamflag_core::evaluate::{self, EvalReport};
use streamflag_core::features::{
    hdoutliers_detect, knn_detect, normalize_columns, transform_derivative, transform_log,
    transform_one_sided, Direction, FeatureMatrix, OutlierScoreSet,
};
use streamflag_core::forecast::{
    auto_arima, fit_arima, fit_linear_ar, fit_naive, fit_regarima, select_ar_order, ForecastModel,
};
use streamflag_core::io::{self, FlagRow, ReportRow};
use streamflag_core::prep::{self, TrainingSet};
use streamflag_core::rules::{run_rules, RuleFinding};
use streamflag_core::series::{AnomalyLabel, DetectorConfig, SeriesFrame, Timestamp};
use streamflag_core::{Error, Result};

use crate::config::{ModelChoice, RunConfig, TransformKind, VariableConfig};
use crate::plot;

/// Conventional two-sided 95% cutoff for partial autocorrelations, used
/// when an autoregressive order has to be picked automatically.
const AR_ORDER_Z: f64 = 1.96;

/// Everything a pipeline run produced.
#[derive(Debug)]
pub struct PipelineOutcome {
    /// One evaluation row per variable × method.
    pub report_rows: Vec<ReportRow>,
    /// Paths of every file written, in write order.
    pub written: Vec<PathBuf>,
}

/// Make a name safe for use in a file name.
pub fn sanitize_filename(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-' {
                c
            } else {
                '-'
            }
        })
        .collect()
}

/// Covariate values for a regression model, as single-column rows aligned
/// to the target frame (`all_rows`) and to the training set (`train_rows`).
pub struct CovariateData {
    pub all_rows: Vec<Vec<f64>>,
    pub train_rows: Vec<Vec<f64>>,
}

/// Sanitize the covariate frame, interpolate it at every target timestamp,
/// and take logs so the regression runs on the same scale as the target.
pub fn covariate_data(
    target: &SeriesFrame,
    covariate: &SeriesFrame,
    training_timestamps: &[Timestamp],
) -> Result<CovariateData> {
    let clean = prep::sanitize_nonpositive(covariate)?;
    let values = prep::interpolate_covariate(target, &clean.frame)?;
    // Interpolants of positive values are positive, so the log is defined.
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let frame_timestamps = target.timestamps();
    let train_rows = prep::covariate_rows(&logs, &frame_timestamps, training_timestamps)?;
    let all_rows = logs.into_iter().map(|v| vec![v]).collect();
    Ok(CovariateData {
        all_rows,
        train_rows,
    })
}

/// Train one model choice on a prepared training set.
pub fn fit_model(
    choice: &ModelChoice,
    training: &TrainingSet,
    covariate_train_rows: Option<&[Vec<f64>]>,
    config: &DetectorConfig,
) -> Result<ForecastModel> {
    match choice {
        ModelChoice::Naive => fit_naive(&training.log_values),
        ModelChoice::LinearAr { p } => {
            let diffs: Vec<f64> = training
                .log_values
                .windows(2)
                .map(|w| w[1] - w[0])
                .collect();
            let p = match p {
                Some(p) => *p,
                None => select_ar_order(&diffs, config.p_max, AR_ORDER_Z)?,
            };
            fit_linear_ar(&diffs, p)
        }
        ModelChoice::Arima { p, d, q } => {
            fit_arima(&training.log_values, *p, *d, *q).map(|(model, _)| model)
        }
        ModelChoice::AutoArima => {
            auto_arima(&training.log_values, config.p_max, config.d_max, config.q_max)
                .map(|(model, _)| model)
        }
        ModelChoice::RegArima { covariate } => {
            let rows = covariate_train_rows.ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "regression on {covariate:?} requested without covariate rows"
                ))
            })?;
            fit_regarima(
                &training.log_values,
                rows,
                config.p_max,
                config.d_max,
                config.q_max,
            )
            .map(|(model, _)| model)
        }
    }
}

/// The feature matrix for a variable: one column per configured transform
/// of the log series, min–max normalized.
pub fn build_feature_matrix(
    frame: &SeriesFrame,
    transforms: &[TransformKind],
) -> Result<FeatureMatrix> {
    if transforms.is_empty() {
        return Err(Error::InvalidConfig(
            "feature detection needs at least one transform".into(),
        ));
    }
    let logs = transform_log(&frame.values())?;
    let mut names = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for transform in transforms {
        let column = match transform {
            TransformKind::Log => logs.clone(),
            TransformKind::Derivative => transform_derivative(&logs)?,
            TransformKind::OneSidedPositive => {
                transform_one_sided(&transform_derivative(&logs)?, Direction::Positive)
            }
            TransformKind::OneSidedNegative => {
                transform_one_sided(&transform_derivative(&logs)?, Direction::Negative)
            }
        };
        names.push(transform.label().to_string());
        columns.push(column);
    }
    let rows: Vec<Vec<f64>> = (0..frame.len())
        .map(|i| columns.iter().map(|c| c[i]).collect())
        .collect();
    let matrix = FeatureMatrix::new(names, frame.timestamps(), rows)?;
    normalize_columns(&matrix)
}

/// Flag rows for the rules stage: one per observation, flagged or not.
pub fn full_rule_rows(frame: &SeriesFrame, findings: &[RuleFinding]) -> Vec<FlagRow> {
    let by_timestamp: BTreeMap<Timestamp, &RuleFinding> =
        findings.iter().map(|f| (f.timestamp, f)).collect();
    frame
        .timestamps()
        .into_iter()
        .map(|timestamp| match by_timestamp.get(&timestamp) {
            Some(finding) => FlagRow {
                timestamp,
                variable: frame.name.clone(),
                method: "rules".into(),
                flagged: true,
                type_code: Some(finding.type_code),
                source: Some("rule".into()),
            },
            None => FlagRow {
                timestamp,
                variable: frame.name.clone(),
                method: "rules".into(),
                flagged: false,
                type_code: None,
                source: None,
            },
        })
        .collect()
}

/// Flag rows for one model run: one per observation the model actually
/// judged — forecast-bearing records minus the timestamps the rules claim.
pub fn trace_flag_rows(
    trace: &DetectionTrace,
    method: &str,
    rule_timestamps: &BTreeSet<Timestamp>,
) -> Vec<FlagRow> {
    trace
        .records
        .iter()
        .filter(|r| r.forecast.is_some() && !rule_timestamps.contains(&r.timestamp))
        .map(|r| {
            let flagged = r.source == Some(FlagSource::Pi);
            FlagRow {
                timestamp: r.timestamp,
                variable: trace.variable.clone(),
                method: method.to_string(),
                flagged,
                type_code: None,
                source: flagged.then(|| FlagSource::Pi.to_string()),
            }
        })
        .collect()
}

/// Flag rows for one feature detector: one per scored row the rules leave
/// to it.
pub fn score_flag_rows(
    variable: &str,
    matrix: &FeatureMatrix,
    scores: &OutlierScoreSet,
    rule_timestamps: &BTreeSet<Timestamp>,
) -> Vec<FlagRow> {
    let method = scores.method.to_string();
    matrix
        .timestamps
        .iter()
        .enumerate()
        .filter(|(_, ts)| !rule_timestamps.contains(ts))
        .map(|(i, ts)| {
            let flagged = scores.flagged.contains(&i);
            FlagRow {
                timestamp: *ts,
                variable: variable.to_string(),
                method: method.clone(),
                flagged,
                type_code: None,
                source: flagged.then(|| method.clone()),
            }
        })
        .collect()
}

fn rule_hits(findings: &[RuleFinding], labels: &BTreeMap<Timestamp, AnomalyLabel>) -> usize {
    findings
        .iter()
        .filter(|f| labels.contains_key(&f.timestamp))
        .count()
}

/// Score one model trace against the labels.
///
/// The metric universe is every forecast-bearing record except those the
/// rules already claimed; the rules' labelled catches are folded back in as
/// true positives. The per-type tally runs over the whole trace, with rule
/// and interval flags combined.
pub fn evaluate_trace(
    trace: &DetectionTrace,
    findings: &[RuleFinding],
    labels: &BTreeMap<Timestamp, AnomalyLabel>,
) -> Result<EvalReport> {
    let rule_timestamps: BTreeSet<Timestamp> = findings.iter().map(|f| f.timestamp).collect();
    let evaluated: Vec<Timestamp> = trace
        .records
        .iter()
        .filter(|r| r.forecast.is_some() && !rule_timestamps.contains(&r.timestamp))
        .map(|r| r.timestamp)
        .collect();
    let flagged: BTreeSet<Timestamp> = trace
        .records
        .iter()
        .filter(|r| r.source == Some(FlagSource::Pi))
        .map(|r| r.timestamp)
        .collect();
    let matrix = evaluate::build_confusion(&evaluated, &flagged, labels)?;
    let folded = evaluate::fold_class2(matrix, rule_hits(findings, labels));
    let mut report = evaluate::metrics(&folded)?;
    report.rmse = Some(evaluate::rmse(trace)?);
    let all_timestamps: Vec<Timestamp> = trace.records.iter().map(|r| r.timestamp).collect();
    let all_flags: BTreeSet<Timestamp> = trace.flagged_timestamps().into_iter().collect();
    report.per_type = evaluate::per_type_report(&all_timestamps, &all_flags, labels)?;
    Ok(report)
}

/// Score one feature detector's output against the labels, with the same
/// universe conventions as [`evaluate_trace`] (no RMSE: score detectors
/// make no forecasts).
pub fn evaluate_scores(
    matrix: &FeatureMatrix,
    scores: &OutlierScoreSet,
    findings: &[RuleFinding],
    labels: &BTreeMap<Timestamp, AnomalyLabel>,
) -> Result<EvalReport> {
    let rule_timestamps: BTreeSet<Timestamp> = findings.iter().map(|f| f.timestamp).collect();
    let score_flags: BTreeSet<Timestamp> = scores
        .flagged
        .iter()
        .map(|&i| matrix.timestamps[i])
        .collect();
    let evaluated: Vec<Timestamp> = matrix
        .timestamps
        .iter()
        .filter(|ts| !rule_timestamps.contains(ts))
        .copied()
        .collect();
    let flagged: BTreeSet<Timestamp> = score_flags
        .iter()
        .filter(|ts| !rule_timestamps.contains(ts))
        .copied()
        .collect();
    let counts = evaluate::build_confusion(&evaluated, &flagged, labels)?;
    let folded = evaluate::fold_class2(counts, rule_hits(findings, labels));
    let mut report = evaluate::metrics(&folded)?;
    let universe: BTreeSet<Timestamp> = matrix.timestamps.iter().copied().collect();
    let all_flags: BTreeSet<Timestamp> = score_flags
        .into_iter()
        .chain(
            rule_timestamps
                .into_iter()
                .filter(|ts| universe.contains(ts)),
        )
        .collect();
    report.per_type = evaluate::per_type_report(&matrix.timestamps, &all_flags, labels)?;
    Ok(report)
}

/// Run the whole pipeline for every configured variable and write the
/// outputs under `out_dir`.
pub fn run_pipeline(config: &RunConfig, input: &Path, out_dir: &Path) -> Result<PipelineOutcome> {
    config.validate()?;
    if config.variables.is_empty() {
        return Err(Error::InvalidConfig(
            "the run config lists no variables to analyse".into(),
        ));
    }
    std::fs::create_dir_all(out_dir)?;
    let frames = io::load_csv(input, &config.mapping)?;
    let mut outcome = PipelineOutcome {
        report_rows: Vec::new(),
        written: Vec::new(),
    };
    for var in &config.variables {
        run_variable(config, var, &frames, out_dir, &mut outcome)?;
    }
    let report_csv = out_dir.join("report.csv");
    io::write_report_csv(&report_csv, &outcome.report_rows)?;
    outcome.written.push(report_csv);
    let report_txt = out_dir.join("report.txt");
    std::fs::write(&report_txt, io::render_report_table(&outcome.report_rows))?;
    outcome.written.push(report_txt);
    Ok(outcome)
}

fn run_variable(
    config: &RunConfig,
    var: &VariableConfig,
    frames: &BTreeMap<String, SeriesFrame>,
    out_dir: &Path,
    outcome: &mut PipelineOutcome,
) -> Result<()> {
    let raw = frames.get(&var.name).ok_or_else(|| {
        Error::InvalidConfig(format!("variable {:?} is not in the input file", var.name))
    })?;
    let spec = config
        .sensor_for(&var.name)
        .expect("config validation requires sensor limits per variable");
    let findings = run_rules(raw, spec, &config.detector)?;
    let rule_timestamps: BTreeSet<Timestamp> = findings.iter().map(|f| f.timestamp).collect();
    let clean = prep::sanitize_nonpositive(raw)?.frame;
    let labelled: BTreeSet<Timestamp> = raw.labels.keys().copied().collect();
    let var_stem = sanitize_filename(&var.name);

    let mut flag_rows = full_rule_rows(raw, &findings);

    let training = if var.models.is_empty() {
        None
    } else {
        Some(prep::build_training_set(raw)?)
    };

    for choice in &var.models {
        let training = training.as_ref().expect("training set built when models exist");
        let covariates = match choice {
            ModelChoice::RegArima { covariate } => {
                let cov_frame = frames.get(covariate).ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "covariate {covariate:?} is not in the input file"
                    ))
                })?;
                Some(covariate_data(&clean, cov_frame, &training.timestamps)?)
            }
            _ => None,
        };
        let model = fit_model(
            choice,
            training,
            covariates.as_ref().map(|c| c.train_rows.as_slice()),
            &config.detector,
        )?;
        for mode in &var.modes {
            let trace = run_detection(
                &clean,
                &model,
                mode.to_mode(),
                &findings,
                covariates.as_ref().map(|c| c.all_rows.as_slice()),
                &config.detector,
            )?;
            let method = format!("{}-{}", choice.label(), mode.label());
            let stem = format!("{var_stem}_{}", sanitize_filename(&method));

            let trace_path = out_dir.join(format!("trace_{stem}.csv"));
            io::write_trace_csv(&trace_path, &trace)?;
            outcome.written.push(trace_path);

            let plot_path = out_dir.join(format!("plot_{stem}.svg"));
            std::fs::write(&plot_path, plot::render_trace_svg(&trace, &labelled)?)?;
            outcome.written.push(plot_path);

            flag_rows.extend(trace_flag_rows(&trace, &method, &rule_timestamps));
            let report = evaluate_trace(&trace, &findings, &raw.labels)?;
            outcome.report_rows.push(ReportRow {
                variable: var.name.clone(),
                method,
                report,
            });
        }
    }

    if !var.feature_methods.is_empty() {
        let matrix = build_feature_matrix(&clean, &var.feature_transforms)?;
        let transform_names: Vec<&str> =
            var.feature_transforms.iter().map(|t| t.label()).collect();
        let transform_desc = transform_names.join("+");
        for method_choice in &var.feature_methods {
            let scores = match method_choice.knn_variant() {
                None => hdoutliers_detect(&matrix, &config.detector)?,
                Some(variant) => {
                    knn_detect(&matrix, config.detector.k_neighbours, variant, &config.detector)?
                }
            };
            let scores_path =
                out_dir.join(format!("scores_{var_stem}_{}.csv", method_choice.label()));
            io::write_scores_csv(&scores_path, &matrix.timestamps, &scores, &transform_desc)?;
            outcome.written.push(scores_path);

            flag_rows.extend(score_flag_rows(&var.name, &matrix, &scores, &rule_timestamps));
            let report = evaluate_scores(&matrix, &scores, &findings, &raw.labels)?;
            outcome.report_rows.push(ReportRow {
                variable: var.name.clone(),
                method: method_choice.label().to_string(),
                report,
            });
        }
    }

    let flags_path = out_dir.join(format!("flags_{var_stem}.csv"));
    io::write_flags_csv(&flags_path, &flag_rows)?;
    outcome.written.push(flags_path);
    Ok(())
}
