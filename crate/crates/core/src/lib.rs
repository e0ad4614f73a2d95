//! Anomaly detection for high-frequency environmental sensor time series.
//!
//! The crate combines three complementary detector families over a shared
//! data model:
//!
//! * **rules** — deterministic if-then checks for impossible values,
//!   out-of-range values, and post-gap observations;
//! * **forecast + detect** — one-step-ahead regression forecasts (naïve,
//!   linear autoregression, ARIMA, regression-with-ARIMA-errors) whose
//!   prediction intervals flag sudden changes;
//! * **features** — feature-space outlier detectors (nearest-neighbour
//!   distance thresholds and aggregated kNN scores) over transformed copies
//!   of the series.
//!
//! [`evaluate`] scores any of them against ground-truth labels, and
//! [`synth`] generates labelled synthetic series for calibration tests.

// Guards like `!(v > 0.0)` are deliberate throughout: unlike `v <= 0.0`,
// they also reject NaN, which must never pass a validity check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detect;
pub mod error;
pub mod evaluate;
pub mod features;
pub mod forecast;
pub mod io;
pub mod linalg;
pub mod optim;
pub mod prep;
pub mod rules;
pub mod series;
pub mod stats;
pub mod synth;

pub use error::{Error, ErrorCategory, Result};
