//! File formats: CSV ingestion with configurable column mapping, the
//! versioned model JSON document, and the flag / trace / score / report
//! writers.
//!
//! Input files are agency exports with site-specific headers, so the
//! mapping between columns and variables is explicit configuration rather
//! than convention. All timestamps are UTC; a custom strftime-style pattern
//! can be supplied for files that don't use RFC 3339.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::detect::DetectionTrace;
use crate::error::{Error, Result};
use crate::evaluate::{round_metric, EvalReport};
use crate::features::OutlierScoreSet;
use crate::forecast::ForecastModel;
use crate::rules::RuleFinding;
use crate::series::{AnomalyLabel, Observation, SeriesFrame, Timestamp, TypeCode};

/// How to read an input CSV: which columns hold what.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    /// Column holding the observation timestamp.
    pub timestamp_column: String,
    /// Variable name → column holding its values. Empty cells mean the
    /// variable was not observed at that timestamp.
    pub value_columns: BTreeMap<String, String>,
    /// Optional column holding ground-truth anomaly type letters.
    #[serde(default)]
    pub label_column: Option<String>,
    /// Optional strftime-style timestamp pattern; RFC 3339 when absent.
    #[serde(default)]
    pub timestamp_format: Option<String>,
}

fn parse_timestamp(text: &str, format: Option<&str>) -> std::result::Result<Timestamp, String> {
    match format {
        None => DateTime::parse_from_rfc3339(text)
            .map(|dt| dt.with_timezone(&Utc))
            .map_err(|e| format!("timestamp {text:?}: {e}")),
        Some(pattern) => NaiveDateTime::parse_from_str(text, pattern)
            .map(|naive| naive.and_utc())
            .map_err(|e| format!("timestamp {text:?} with format {pattern:?}: {e}")),
    }
}

/// Read one CSV file into one frame per mapped variable.
///
/// Rows are keyed by the timestamp column; an empty value cell skips that
/// variable for the row (that is how gaps enter a frame). Label letters
/// attach as ground truth to every variable observed at that timestamp.
pub fn load_csv(path: &Path, mapping: &ColumnMapping) -> Result<BTreeMap<String, SeriesFrame>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "column {name:?} not found in header [{}]",
                headers.iter().collect::<Vec<_>>().join(", ")
            ))
        })
    };
    let ts_idx = column(&mapping.timestamp_column)?;
    let label_idx = mapping
        .label_column
        .as_deref()
        .map(column)
        .transpose()?;
    let mut value_idx: BTreeMap<&str, usize> = BTreeMap::new();
    for (variable, column_name) in &mapping.value_columns {
        value_idx.insert(variable, column(column_name)?);
    }

    let parse_error = |record: u64, message: String| Error::Parse {
        path: path.display().to_string(),
        record,
        message,
    };

    let mut observations: BTreeMap<&str, Vec<Observation>> = BTreeMap::new();
    let mut labels: BTreeMap<&str, BTreeMap<Timestamp, AnomalyLabel>> = BTreeMap::new();
    for result in reader.records() {
        let record = result?;
        let line = record.position().map_or(0, |p| p.line());
        let ts_text = record.get(ts_idx).unwrap_or("");
        let timestamp =
            parse_timestamp(ts_text, mapping.timestamp_format.as_deref())
                .map_err(|m| parse_error(line, m))?;
        let label = match label_idx.map(|i| record.get(i).unwrap_or("").trim()) {
            Some("") | None => None,
            Some(letter) => {
                let mut chars = letter.chars();
                let (first, rest) = (chars.next(), chars.next());
                match (first, rest) {
                    (Some(c), None) => Some(AnomalyLabel::ground_truth(
                        TypeCode::from_char(c)
                            .map_err(|_| parse_error(line, format!("unknown anomaly type {letter:?}")))?,
                    )),
                    _ => return Err(parse_error(line, format!("unknown anomaly type {letter:?}"))),
                }
            }
        };
        for (variable, &idx) in &value_idx {
            let cell = record.get(idx).unwrap_or("").trim();
            if cell.is_empty() {
                continue;
            }
            let value: f64 = cell
                .parse()
                .map_err(|e| parse_error(line, format!("value {cell:?} in {variable}: {e}")))?;
            observations.entry(variable).or_default().push(Observation {
                timestamp,
                value,
                quality: None,
            });
            if let Some(label) = label {
                labels.entry(variable).or_default().insert(timestamp, label);
            }
        }
    }

    let mut frames = BTreeMap::new();
    for (variable, obs) in observations {
        let frame_labels = labels.remove(variable).unwrap_or_default();
        frames.insert(
            variable.to_string(),
            SeriesFrame::new(variable, obs, frame_labels)?,
        );
    }
    Ok(frames)
}

/// Version of the model document this build reads and writes.
pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// The on-disk form of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    /// Document format version.
    pub schema_version: u32,
    /// Variable the model was trained for.
    pub variable: String,
    /// The fitted model itself.
    pub model: ForecastModel,
}

/// Write a model document as pretty JSON.
pub fn write_model_json(path: &Path, document: &ModelDocument) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut file, document)?;
    file.write_all(b"\n")?;
    Ok(())
}

/// Read a model document, rejecting unknown schema versions.
pub fn read_model_json(path: &Path) -> Result<ModelDocument> {
    let text = std::fs::read_to_string(path)?;
    let document: ModelDocument = serde_json::from_str(&text)?;
    if document.schema_version != MODEL_SCHEMA_VERSION {
        return Err(Error::UnsupportedSchema {
            found: document.schema_version,
            supported: MODEL_SCHEMA_VERSION,
        });
    }
    document.model.validate()?;
    Ok(document)
}

/// Write a frame in the standard input schema: timestamp column named
/// `datetime`, one value column named after the variable, and a `label`
/// column with ground-truth type letters.
pub fn write_frame_csv(path: &Path, frame: &SeriesFrame) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["datetime", frame.name.as_str(), "label"])?;
    for obs in &frame.observations {
        let label = frame
            .label_at(obs.timestamp)
            .map(|l| l.type_code.to_string())
            .unwrap_or_default();
        writer.write_record([
            obs.timestamp.to_rfc3339().as_str(),
            &fmt_float(obs.value),
            &label,
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// One row of the flag file: every evaluated observation of every method
/// appears, flagged or not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagRow {
    /// Observation timestamp.
    pub timestamp: Timestamp,
    /// Variable the observation belongs to.
    pub variable: String,
    /// Detector that evaluated it (e.g. `naive-adam`, `knn-agg`).
    pub method: String,
    /// Whether the detector flagged it.
    pub flagged: bool,
    /// Anomaly type, for rule findings.
    pub type_code: Option<TypeCode>,
    /// What raised the flag (`rule` / `pi` / detector name), empty when
    /// unflagged.
    pub source: Option<String>,
}

/// Write flag rows as CSV.
pub fn write_flags_csv(path: &Path, rows: &[FlagRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["timestamp", "variable", "method", "flagged", "type_code", "source"])?;
    for row in rows {
        writer.write_record([
            row.timestamp.to_rfc3339().as_str(),
            &row.variable,
            &row.method,
            if row.flagged { "true" } else { "false" },
            &row.type_code.map(|c| c.to_string()).unwrap_or_default(),
            row.source.as_deref().unwrap_or(""),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Flag rows for a set of rule findings (one row per finding; unflagged
/// observations are not part of a rules-only report).
pub fn rule_flag_rows(variable: &str, findings: &[RuleFinding]) -> Vec<FlagRow> {
    findings
        .iter()
        .map(|f| FlagRow {
            timestamp: f.timestamp,
            variable: variable.to_string(),
            method: "rules".into(),
            flagged: true,
            type_code: Some(f.type_code),
            source: Some("rule".into()),
        })
        .collect()
}

fn fmt_float(v: f64) -> String {
    // Full precision, shortest round-trip form.
    format!("{v}")
}

/// Write a detection trace as CSV: one row per record, interval columns
/// empty during warmup.
pub fn write_trace_csv(path: &Path, trace: &DetectionTrace) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "timestamp", "observed", "forecast", "lower", "upper", "flagged", "source", "mode",
    ])?;
    let mode = trace.mode.to_string();
    for r in &trace.records {
        writer.write_record([
            r.timestamp.to_rfc3339().as_str(),
            &fmt_float(r.observed),
            &r.forecast.map(fmt_float).unwrap_or_default(),
            &r.pi.map(|pi| fmt_float(pi.lower)).unwrap_or_default(),
            &r.pi.map(|pi| fmt_float(pi.upper)).unwrap_or_default(),
            if r.flagged { "true" } else { "false" },
            &r.source.map(|s| s.to_string()).unwrap_or_default(),
            &mode,
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Read a flag file back.
pub fn read_flags_csv(path: &Path) -> Result<Vec<FlagRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let parse_error = |record: u64, message: String| Error::Parse {
        path: path.display().to_string(),
        record,
        message,
    };
    let mut rows = Vec::new();
    for result in reader.records() {
        let record = result?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let timestamp = parse_timestamp(field(0), None).map_err(|m| parse_error(line, m))?;
        let type_code = match field(4) {
            "" => None,
            text => Some(
                text.parse::<TypeCode>()
                    .map_err(|_| parse_error(line, format!("unknown anomaly type {text:?}")))?,
            ),
        };
        rows.push(FlagRow {
            timestamp,
            variable: field(1).to_string(),
            method: field(2).to_string(),
            flagged: field(3) == "true",
            type_code,
            source: match field(5) {
                "" => None,
                text => Some(text.to_string()),
            },
        });
    }
    Ok(rows)
}

/// Read a detection trace back from its CSV form.
///
/// The file does not store the interval's significance level or the
/// variable name, so the intervals are rebuilt with a zero alpha slot and
/// the frame name comes from the file stem; ADAM substitutions are
/// reconstructed from the mode/source columns.
pub fn read_trace_csv(path: &Path) -> Result<DetectionTrace> {
    use crate::detect::{DetectionMode, FlagSource, PredictionInterval, TraceRecord};
    let mut reader = csv::Reader::from_path(path)?;
    let parse_error = |record: u64, message: String| Error::Parse {
        path: path.display().to_string(),
        record,
        message,
    };
    let mut records = Vec::new();
    let mut mode = DetectionMode::Ad;
    for result in reader.records() {
        let record = result?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let number = |i: usize| -> Result<Option<f64>> {
            match field(i) {
                "" => Ok(None),
                text => text
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|e| parse_error(line, format!("number {text:?}: {e}"))),
            }
        };
        let timestamp = parse_timestamp(field(0), None).map_err(|m| parse_error(line, m))?;
        let observed = number(1)?
            .ok_or_else(|| parse_error(line, "missing observed value".into()))?;
        let forecast = number(2)?;
        let pi = match (forecast, number(3)?, number(4)?) {
            (Some(center), Some(lower), Some(upper)) => Some(PredictionInterval {
                lower,
                upper,
                center,
                alpha: 0.0,
            }),
            _ => None,
        };
        let source = match field(6) {
            "" => None,
            "rule" => Some(FlagSource::Rule),
            "pi" => Some(FlagSource::Pi),
            other => return Err(parse_error(line, format!("unknown flag source {other:?}"))),
        };
        mode = match field(7) {
            "AD" => DetectionMode::Ad,
            "ADAM" => DetectionMode::Adam,
            other => return Err(parse_error(line, format!("unknown mode {other:?}"))),
        };
        // Substitution happens exactly when the observation broke its
        // interval in ADAM mode (even if a rule claimed the flag's source).
        let substituted = mode == DetectionMode::Adam
            && pi.is_some_and(|pi| crate::detect::classify_observation(observed, &pi));
        records.push(TraceRecord {
            timestamp,
            observed,
            used_value: match (substituted, forecast) {
                (true, Some(f)) => f,
                _ => observed,
            },
            forecast,
            pi,
            flagged: field(5) == "true",
            source,
        });
    }
    let variable = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(DetectionTrace {
        variable,
        mode,
        records,
    })
}

/// Write an outlier score set as CSV, one row per matrix row.
pub fn write_scores_csv(
    path: &Path,
    timestamps: &[Timestamp],
    scores: &OutlierScoreSet,
    transform: &str,
) -> Result<()> {
    if timestamps.len() != scores.scores.len() {
        return Err(Error::Alignment(format!(
            "{} timestamps for {} scores",
            timestamps.len(),
            scores.scores.len()
        )));
    }
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["timestamp", "score", "flagged", "method", "transform"])?;
    let method = scores.method.to_string();
    for (i, (ts, score)) in timestamps.iter().zip(&scores.scores).enumerate() {
        writer.write_record([
            ts.to_rfc3339().as_str(),
            &fmt_float(*score),
            if scores.flagged.contains(&i) { "true" } else { "false" },
            &method,
            transform,
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// A labelled evaluation report row for the report CSV / text table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    /// Variable evaluated.
    pub variable: String,
    /// Detector (and mode) evaluated.
    pub method: String,
    /// The metrics.
    pub report: EvalReport,
}

fn opt_metric(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_else(|| "n/a".into())
}

/// Write evaluation rows as CSV, full precision, column order of the
/// summary tables: counts then accuracy, error rate, NPV, PPV, RMSE.
pub fn write_report_csv(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "variable", "method", "tn", "fn", "fp", "tp",
        "accuracy", "error_rate", "npv", "ppv", "rmse",
    ])?;
    for row in rows {
        let m = &row.report.matrix;
        writer.write_record([
            row.variable.as_str(),
            &row.method,
            &m.true_negatives.to_string(),
            &m.false_negatives.to_string(),
            &m.false_positives.to_string(),
            &m.true_positives.to_string(),
            &fmt_float(row.report.accuracy),
            &fmt_float(row.report.error_rate),
            &opt_metric(row.report.npv),
            &opt_metric(row.report.ppv),
            &opt_metric(row.report.rmse),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Render evaluation rows as an aligned text table with display rounding.
pub fn render_report_table(rows: &[ReportRow]) -> String {
    let mut cells: Vec<[String; 11]> = vec![[
        "variable".into(), "method".into(), "TN".into(), "FN".into(), "FP".into(), "TP".into(),
        "Accuracy".into(), "Error".into(), "NPV".into(), "PPV".into(), "RMSE".into(),
    ]];
    let rounded = |v: Option<f64>| {
        v.map(|x| format!("{:.2}", round_metric(x))).unwrap_or_else(|| "n/a".into())
    };
    for row in rows {
        let m = &row.report.matrix;
        cells.push([
            row.variable.clone(),
            row.method.clone(),
            m.true_negatives.to_string(),
            m.false_negatives.to_string(),
            m.false_positives.to_string(),
            m.true_positives.to_string(),
            rounded(Some(row.report.accuracy)),
            rounded(Some(row.report.error_rate)),
            rounded(row.report.npv),
            rounded(row.report.ppv),
            rounded(row.report.rmse),
        ]);
    }
    let mut widths = [0usize; 11];
    for row in &cells {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    for row in &cells {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (cell, w))| {
                if i < 2 {
                    format!("{cell:<w$}", w = w)
                } else {
                    format!("{cell:>w$}", w = w)
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}
