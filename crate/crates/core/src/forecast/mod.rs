//! One-step-ahead forecasting models.
//!
//! Four model families share one representation ([`ForecastModel`]) and one
//! sequential forecasting engine ([`ForecastEngine`]):
//!
//! * **naïve** — the most recent observation is the forecast; equivalent to
//!   an integrated model of order one with no constant;
//! * **linear autoregression** — ordinary least squares on lagged values,
//!   with the order picked from the partial autocorrelation function;
//! * **ARIMA** — full `(p, d, q)` models estimated by conditional
//!   sum-of-squares, with automatic order search by information criterion;
//! * **regression with ARIMA errors** — a covariate regression whose error
//!   term follows an ARIMA model, estimated in stages.
//!
//! All fitting is deterministic: the optimizer uses a fixed start schedule
//! and no randomness anywhere.

mod arima;
mod diagnostics;
mod regarima;

pub use arima::{auto_arima, fit_arima, order_grid};
pub use diagnostics::{ljung_box, FitDiagnostics};
pub use regarima::fit_regarima;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::stats;

/// Default floor on the residual scale `s`, keeping prediction intervals
/// strictly positive in width even on constant training data.
pub const DEFAULT_S_FLOOR: f64 = 1e-8;

/// Which model family a [`ForecastModel`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Most recent observation as forecast.
    Naive,
    /// Least-squares autoregression with a constant.
    LinearAr,
    /// Integrated autoregressive moving-average model.
    Arima,
    /// Covariate regression with ARIMA errors.
    RegArima,
}

/// The transform the model's training series was on. Detection applies the
/// same transform to test data before forecasting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    /// Natural log of the raw values.
    Log,
    /// First difference of the natural log.
    DiffLog,
}

/// A fitted one-step-ahead forecasting model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastModel {
    /// Model family.
    pub kind: ModelKind,
    /// Autoregressive order.
    pub p: usize,
    /// Differencing order.
    pub d: usize,
    /// Moving-average order.
    pub q: usize,
    /// Constant term of the (differenced) model. Zero whenever `d ≥ 1`: a
    /// constant is only estimated for undifferenced models.
    pub constant: f64,
    /// Autoregressive coefficients `φ_1..φ_p`.
    pub phi: Vec<f64>,
    /// Moving-average coefficients `θ_1..θ_q` (sign convention:
    /// `w_t = c + Σφ_i w_{t−i} + ε_t + Σθ_j ε_{t−j}`).
    pub theta: Vec<f64>,
    /// Regression coefficients `[β_0 (intercept), β_1..β_k]`; empty unless
    /// the model has covariates.
    pub beta: Vec<f64>,
    /// Residual scale: square root of the mean squared training residual,
    /// floored at [`DEFAULT_S_FLOOR`].
    pub s: f64,
    /// Number of training observations the model was fitted on.
    pub train_len: usize,
    /// Parameter count used for the prediction interval's degrees of
    /// freedom.
    pub k_params: usize,
    /// Transform of the training series.
    pub training_transform: Transform,
}

impl ForecastModel {
    /// Test observations consumed before the first forecast is available.
    pub fn warmup(&self) -> usize {
        self.p + self.d
    }

    /// Degrees of freedom for the prediction interval's t quantile.
    pub fn dof(&self) -> Result<f64> {
        if self.train_len <= self.k_params {
            return Err(Error::InvalidDof(format!(
                "training size {} does not exceed parameter count {}",
                self.train_len, self.k_params
            )));
        }
        Ok((self.train_len - self.k_params) as f64)
    }

    /// Check structural invariants; fit functions uphold these, and loading
    /// a persisted model re-checks them.
    pub fn validate(&self) -> Result<()> {
        if self.phi.len() != self.p || self.theta.len() != self.q {
            return Err(Error::InvalidConfig(format!(
                "coefficient lengths ({}, {}) disagree with orders ({}, {})",
                self.phi.len(),
                self.theta.len(),
                self.p,
                self.q
            )));
        }
        if !(self.s > 0.0) || !self.s.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "residual scale must be positive and finite, got {}",
                self.s
            )));
        }
        if self.k_params == 0 {
            return Err(Error::InvalidConfig(
                "parameter count must be at least 1".into(),
            ));
        }
        if (self.kind == ModelKind::RegArima) != !self.beta.is_empty() {
            return Err(Error::InvalidConfig(
                "regression coefficients present iff the model has covariates".into(),
            ));
        }
        Ok(())
    }

    /// Regression part `β_0 + Σ β_{j+1} z_j` for models with covariates.
    pub fn regression_part(&self, z: &[f64]) -> Result<f64> {
        if self.beta.is_empty() {
            return Err(Error::InvalidConfig(
                "model has no regression coefficients".into(),
            ));
        }
        if z.len() + 1 != self.beta.len() {
            return Err(Error::Alignment(format!(
                "covariate row has {} entries, model expects {}",
                z.len(),
                self.beta.len() - 1
            )));
        }
        Ok(self.beta[0] + self.beta[1..].iter().zip(z).map(|(b, v)| b * v).sum::<f64>())
    }
}

/// Difference a series `d` times. Output length shrinks by `d`.
pub(crate) fn difference(series: &[f64], d: usize) -> Vec<f64> {
    let mut w = series.to_vec();
    for _ in 0..d {
        w = w.windows(2).map(|pair| pair[1] - pair[0]).collect();
    }
    w
}

/// Fit the naïve model: the most recent observation is the forecast. The
/// residual scale comes from the one-step differences of the training data.
pub fn fit_naive(train: &[f64]) -> Result<ForecastModel> {
    if train.len() < 2 {
        return Err(Error::InsufficientData {
            context: "naive fit",
            needed: 2,
            got: train.len(),
        });
    }
    let diffs = difference(train, 1);
    let rss: f64 = diffs.iter().map(|e| e * e).sum();
    let s = (rss / diffs.len() as f64).sqrt().max(DEFAULT_S_FLOOR);
    Ok(ForecastModel {
        kind: ModelKind::Naive,
        p: 0,
        d: 1,
        q: 0,
        constant: 0.0,
        phi: Vec::new(),
        theta: Vec::new(),
        beta: Vec::new(),
        s,
        train_len: train.len(),
        k_params: 1,
        training_transform: Transform::Log,
    })
}

/// Forecast one step ahead with a naïve model: return the last observation.
pub fn forecast_naive(model: &ForecastModel, last_observed: f64) -> Result<f64> {
    if model.kind != ModelKind::Naive {
        return Err(Error::InvalidConfig(format!(
            "forecast_naive called on a {:?} model",
            model.kind
        )));
    }
    Ok(last_observed)
}

/// Partial autocorrelations of `train` at lags `1..=max_lag`.
pub fn pacf(train: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let acf = stats::sample_acf(train, max_lag)?;
    stats::pacf_from_acf(&acf)
}

/// Pick an autoregressive order from the partial autocorrelation function:
/// the largest lag `ℓ ≤ p_max` whose PACF magnitude exceeds
/// `significance_z / √n`, falling back to 1 when none does.
pub fn select_ar_order(train: &[f64], p_max: usize, significance_z: f64) -> Result<usize> {
    if p_max == 0 {
        return Err(Error::InvalidConfig(
            "autoregressive order search needs p_max ≥ 1".into(),
        ));
    }
    let values = pacf(train, p_max)?;
    let band = significance_z / (train.len() as f64).sqrt();
    let selected = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > band)
        .map(|(i, _)| i + 1)
        .next_back()
        .unwrap_or(1);
    Ok(selected)
}

/// Fit a linear autoregression of order `p` (constant plus `p` lags) by
/// ordinary least squares.
pub fn fit_linear_ar(train: &[f64], p: usize) -> Result<ForecastModel> {
    if p == 0 {
        return Err(Error::InvalidConfig(
            "linear autoregression needs p ≥ 1".into(),
        ));
    }
    if train.len() < p + 2 {
        return Err(Error::InsufficientData {
            context: "linear autoregression fit",
            needed: p + 2,
            got: train.len(),
        });
    }
    let m = stats::mean(train);
    if stats::sum_sq_dev(train, m) <= 0.0 {
        return Err(Error::DegenerateSeries(
            "linear autoregression on a constant series has a singular design".into(),
        ));
    }
    let n = train.len();
    let mut rows = Vec::with_capacity(n - p);
    let mut y = Vec::with_capacity(n - p);
    for t in p..n {
        let mut row = Vec::with_capacity(p + 1);
        row.push(1.0);
        for i in 1..=p {
            row.push(train[t - i]);
        }
        rows.push(row);
        y.push(train[t]);
    }
    let beta = linalg::least_squares(&rows, &y).map_err(|e| match e {
        Error::Collinear(_) => Error::DegenerateSeries(
            "linear autoregression design is singular (not enough variation)".into(),
        ),
        other => other,
    })?;
    let resid = linalg::residuals(&rows, &y, &beta);
    let rss: f64 = resid.iter().map(|e| e * e).sum();
    let s = (rss / resid.len() as f64).sqrt().max(DEFAULT_S_FLOOR);
    Ok(ForecastModel {
        kind: ModelKind::LinearAr,
        p,
        d: 0,
        q: 0,
        constant: beta[0],
        phi: beta[1..].to_vec(),
        theta: Vec::new(),
        beta: Vec::new(),
        s,
        train_len: n,
        k_params: p + 1,
        training_transform: Transform::DiffLog,
    })
}

/// Sequential forecasting state for one model over one series.
///
/// Feed values in time order with [`push`](Self::push); between pushes,
/// [`forecast`](Self::forecast) gives the one-step-ahead mean for the next
/// value, once `p + d` values have been seen. For covariate models the
/// engine operates on the regression-error series (the caller subtracts the
/// regression part before pushing and adds it back to forecasts).
///
/// Innovation estimates for the moving-average terms start at zero before
/// the sample and stay zero for the first `p` usable (differenced) values —
/// exactly the convention the fitting residuals use, so an engine replaying
/// the training series reproduces the training residuals.
#[derive(Debug, Clone)]
pub struct ForecastEngine<'m> {
    model: &'m ForecastModel,
    /// Last input value of each differencing stage (stage `i` holds the
    /// `i`-times-differenced series).
    stage_last: Vec<Option<f64>>,
    /// Most recent differenced values, newest first, at most `p`.
    w_lags: VecDeque<f64>,
    /// Most recent innovation estimates, newest first, at most `q`.
    eps_lags: VecDeque<f64>,
    seen: usize,
}

impl<'m> ForecastEngine<'m> {
    /// Fresh engine with empty history.
    pub fn new(model: &'m ForecastModel) -> Self {
        Self {
            model,
            stage_last: vec![None; model.d],
            w_lags: VecDeque::with_capacity(model.p),
            eps_lags: VecDeque::with_capacity(model.q),
            seen: 0,
        }
    }

    /// Number of values pushed so far.
    pub fn seen(&self) -> usize {
        self.seen
    }

    /// True once enough history (`p + d` values) is in to forecast.
    pub fn ready(&self) -> bool {
        self.seen >= self.model.warmup()
    }

    /// Forecast of the next differenced value.
    fn forecast_w(&self) -> f64 {
        let mut pred = self.model.constant;
        for (phi, w) in self.model.phi.iter().zip(&self.w_lags) {
            pred += phi * w;
        }
        for (theta, eps) in self.model.theta.iter().zip(&self.eps_lags) {
            pred += theta * eps;
        }
        pred
    }

    /// One-step-ahead mean forecast for the next value on the engine's
    /// input scale, or `None` during warmup.
    pub fn forecast(&self) -> Option<f64> {
        if !self.ready() {
            return None;
        }
        let mut pred = self.forecast_w();
        // Undo the differencing: each stage adds back its last level.
        for stage in self.stage_last.iter().rev() {
            pred += stage.expect("all stages primed once ready");
        }
        Some(pred)
    }

    /// Absorb the next value (actual or substituted) into the history state.
    /// Returns the innovation estimate recorded for this step, if the value
    /// produced a usable differenced term.
    pub fn push(&mut self, value: f64) -> Option<f64> {
        let pending_forecast_w = if self.ready() {
            Some(self.forecast_w())
        } else {
            None
        };
        let mut v = value;
        let mut have_w = true;
        for stage in self.stage_last.iter_mut() {
            match *stage {
                Some(prev) => {
                    let diff = v - prev;
                    *stage = Some(v);
                    v = diff;
                }
                None => {
                    *stage = Some(v);
                    have_w = false;
                    break;
                }
            }
        }
        self.seen += 1;
        if !have_w {
            return None;
        }
        // Values inside the conditioning window get zero innovations.
        let eps = pending_forecast_w.map_or(0.0, |fw| v - fw);
        if self.model.q > 0 {
            self.eps_lags.push_front(eps);
            self.eps_lags.truncate(self.model.q);
        }
        if self.model.p > 0 {
            self.w_lags.push_front(v);
            self.w_lags.truncate(self.model.p);
        }
        Some(eps)
    }
}

/// One-step-ahead mean forecast given a history on the model's transformed
/// scale.
///
/// For covariate models the history must be the regression-error series
/// (observed minus regression part) and `z_next` supplies the next
/// covariate row, whose regression part is added to the returned forecast.
/// For all other kinds `z_next` must be `None`.
pub fn forecast_one_step(
    model: &ForecastModel,
    history: &[f64],
    z_next: Option<&[f64]>,
) -> Result<f64> {
    let regression = match (model.kind, z_next) {
        (ModelKind::RegArima, Some(z)) => model.regression_part(z)?,
        (ModelKind::RegArima, None) => {
            return Err(Error::MissingCovariate(
                "covariate model needs the next covariate row to forecast".into(),
            ))
        }
        (_, Some(_)) => {
            return Err(Error::InvalidConfig(
                "covariate row supplied to a model without covariates".into(),
            ))
        }
        (_, None) => 0.0,
    };
    if history.len() < model.warmup() {
        return Err(Error::InsufficientData {
            context: "one-step forecast",
            needed: model.warmup(),
            got: history.len(),
        });
    }
    let mut engine = ForecastEngine::new(model);
    for &v in history {
        engine.push(v);
    }
    let base = engine
        .forecast()
        .expect("history length checked against warmup");
    Ok(base + regression)
}
