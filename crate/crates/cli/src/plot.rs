//! Deterministic SVG rendering of a detection trace: the interval band,
//! the observed series, and one marker per observation coloured by how the
//! detector's verdict compares with the reference labels.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use streamflag_core::detect::{DetectionTrace, TraceRecord};
use streamflag_core::{Error, Result};

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 48.0;

/// How an observation's verdict lines up with the reference labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum MarkerClass {
    Normal,
    Detected,
    FalseAlarm,
    Missed,
}

impl MarkerClass {
    fn of(flagged: bool, labelled: bool) -> Self {
        match (flagged, labelled) {
            (false, false) => MarkerClass::Normal,
            (true, true) => MarkerClass::Detected,
            (true, false) => MarkerClass::FalseAlarm,
            (false, true) => MarkerClass::Missed,
        }
    }

    fn colour(self) -> &'static str {
        match self {
            MarkerClass::Normal => "#5b8bb0",
            MarkerClass::Detected => "#2e8540",
            MarkerClass::FalseAlarm => "#d0342c",
            MarkerClass::Missed => "#e8a33d",
        }
    }

    fn name(self) -> &'static str {
        match self {
            MarkerClass::Normal => "normal",
            MarkerClass::Detected => "detected anomaly",
            MarkerClass::FalseAlarm => "false alarm",
            MarkerClass::Missed => "missed anomaly",
        }
    }
}

struct Scale {
    t0: i64,
    t_span: f64,
    y_min: f64,
    y_span: f64,
}

impl Scale {
    fn x(&self, t: DateTime<Utc>) -> f64 {
        let frac = if self.t_span > 0.0 {
            (t.timestamp() - self.t0) as f64 / self.t_span
        } else {
            0.5
        };
        MARGIN_LEFT + frac * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        let frac = if self.y_span > 0.0 {
            (v - self.y_min) / self.y_span
        } else {
            0.5
        };
        HEIGHT - MARGIN_BOTTOM - frac * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn fit_scale(records: &[TraceRecord]) -> Scale {
    let t0 = records.first().map(|r| r.timestamp.timestamp()).unwrap_or(0);
    let t1 = records.last().map(|r| r.timestamp.timestamp()).unwrap_or(0);
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for record in records {
        for v in [Some(record.observed), Some(record.used_value)]
            .into_iter()
            .flatten()
            .chain(record.forecast)
            .chain(record.pi.as_ref().map(|pi| pi.lower))
            .chain(record.pi.as_ref().map(|pi| pi.upper))
        {
            if v.is_finite() {
                y_min = y_min.min(v);
                y_max = y_max.max(v);
            }
        }
    }
    if !y_min.is_finite() {
        y_min = 0.0;
        y_max = 1.0;
    }
    let pad = 0.05 * (y_max - y_min).max(1e-12);
    Scale {
        t0,
        t_span: (t1 - t0) as f64,
        y_min: y_min - pad,
        y_span: (y_max - y_min) + 2.0 * pad,
    }
}

fn push_band(svg: &mut String, run: &[TraceRecord], scale: &Scale) {
    if run.len() < 2 {
        return;
    }
    let mut points = String::new();
    for record in run {
        let pi = record.pi.as_ref().expect("band runs hold interval records");
        points.push_str(&format!(
            "{:.2},{:.2} ",
            scale.x(record.timestamp),
            scale.y(pi.upper)
        ));
    }
    for record in run.iter().rev() {
        let pi = record.pi.as_ref().expect("band runs hold interval records");
        points.push_str(&format!(
            "{:.2},{:.2} ",
            scale.x(record.timestamp),
            scale.y(pi.lower)
        ));
    }
    svg.push_str(&format!(
        "  <polygon points=\"{}\" fill=\"#9ecae1\" fill-opacity=\"0.35\" stroke=\"none\"/>\n",
        points.trim_end()
    ));
}

fn axis_labels(svg: &mut String, records: &[TraceRecord], scale: &Scale) {
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    svg.push_str(&format!(
        "  <line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x1:.2}\" y2=\"{y0:.2}\" stroke=\"#444\"/>\n"
    ));
    svg.push_str(&format!(
        "  <line x1=\"{x0:.2}\" y1=\"{:.2}\" x2=\"{x0:.2}\" y2=\"{y0:.2}\" stroke=\"#444\"/>\n",
        MARGIN_TOP
    ));
    for i in 0..=3 {
        let v = scale.y_min + scale.y_span * f64::from(i) / 3.0;
        let y = scale.y(v);
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\" fill=\"#444\">{v:.3}</text>\n",
            x0 - 6.0,
            y + 4.0
        ));
    }
    if let (Some(first), Some(last)) = (records.first(), records.last()) {
        svg.push_str(&format!(
            "  <text x=\"{x0:.2}\" y=\"{:.2}\" font-size=\"11\" fill=\"#444\">{}</text>\n",
            y0 + 18.0,
            first.timestamp.format("%Y-%m-%d %H:%M")
        ));
        svg.push_str(&format!(
            "  <text x=\"{x1:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\" fill=\"#444\">{}</text>\n",
            y0 + 18.0,
            last.timestamp.format("%Y-%m-%d %H:%M")
        ));
    }
}

/// Render a trace as a self-contained SVG document.
///
/// `labelled` holds the timestamps of reference anomalies; markers are
/// coloured by comparing each record's flag with membership in that set.
/// Records whose used value differs from the observation (interval-flagged
/// points under the substituting mode) get an extra marker at the value the
/// detector actually consumed.
pub fn render_trace_svg(
    trace: &DetectionTrace,
    labelled: &BTreeSet<DateTime<Utc>>,
) -> Result<String> {
    if trace.records.is_empty() {
        return Err(Error::InsufficientData {
            needed: 1,
            got: 0,
            context: "plotting a detection trace",
        });
    }
    let scale = fit_scale(&trace.records);
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("  <rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n");
    svg.push_str(&format!(
        "  <text x=\"{MARGIN_LEFT}\" y=\"24\" font-size=\"15\" fill=\"#222\">{} — {}</text>\n",
        trace.variable, trace.mode
    ));

    // Interval band, split into contiguous runs of records that carry one.
    let mut start = None;
    for (i, record) in trace.records.iter().enumerate() {
        match (record.pi.is_some(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                push_band(&mut svg, &trace.records[s..i], &scale);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        push_band(&mut svg, &trace.records[s..], &scale);
    }

    axis_labels(&mut svg, &trace.records, &scale);

    // Observed series.
    let mut points = String::new();
    for record in &trace.records {
        points.push_str(&format!(
            "{:.2},{:.2} ",
            scale.x(record.timestamp),
            scale.y(record.observed)
        ));
    }
    svg.push_str(&format!(
        "  <polyline points=\"{}\" fill=\"none\" stroke=\"#555\" stroke-width=\"1\"/>\n",
        points.trim_end()
    ));

    // Markers, plus a diamond at the consumed value when it was substituted.
    let mut present = BTreeSet::new();
    let mut any_substituted = false;
    for record in &trace.records {
        let class = MarkerClass::of(record.flagged, labelled.contains(&record.timestamp));
        present.insert(class);
        let x = scale.x(record.timestamp);
        svg.push_str(&format!(
            "  <circle cx=\"{x:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\"/>\n",
            scale.y(record.observed),
            class.colour()
        ));
        if record.used_value != record.observed {
            any_substituted = true;
            let y = scale.y(record.used_value);
            svg.push_str(&format!(
                "  <path class=\"substituted\" d=\"M {x:.2} {:.2} L {:.2} {y:.2} L {x:.2} {:.2} L {:.2} {y:.2} Z\" \
                 fill=\"none\" stroke=\"#6a3d9a\" stroke-width=\"1.5\"/>\n",
                y - 4.5,
                x + 4.5,
                y + 4.5,
                x - 4.5
            ));
        }
    }

    // Legend: only the marker classes that actually occur.
    let mut ly = MARGIN_TOP + 8.0;
    let lx = MARGIN_LEFT + 12.0;
    for class in &present {
        svg.push_str(&format!(
            "  <circle cx=\"{lx:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"{}\"/>\n",
            ly - 4.0,
            class.colour()
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{ly:.2}\" font-size=\"12\" fill=\"#222\">{}</text>\n",
            lx + 10.0,
            class.name()
        ));
        ly += 18.0;
    }
    if any_substituted {
        svg.push_str(&format!(
            "  <path d=\"M {lx:.2} {:.2} L {:.2} {:.2} L {lx:.2} {ly:.2} L {:.2} {:.2} Z\" \
             fill=\"none\" stroke=\"#6a3d9a\" stroke-width=\"1.5\"/>\n",
            ly - 8.0,
            lx + 4.0,
            ly - 4.0,
            lx - 4.0,
            ly - 4.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{ly:.2}\" font-size=\"12\" fill=\"#222\">substituted value</text>\n",
            lx + 10.0
        ));
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}
