//! Covariate regression with ARIMA errors, estimated in stages.
//!
//! 1. Ordinary least squares of the response on an intercept plus the
//!    usable covariate columns.
//! 2. Automatic ARIMA order search on the OLS residuals.
//! 3. One re-estimation of the regression coefficients by generalized
//!    differencing: response and design columns are passed through the
//!    stage-2 ARMA filter (difference `d` times, then invert the moving
//!    average recursively), and the slopes are re-fit on the filtered data.
//!
//! Staged estimation is deterministic and each stage is testable on its
//! own; no joint optimization is attempted.

use crate::error::{Error, Result};
use crate::linalg;
use crate::stats;

use super::arima::{auto_arima, css_residuals};
use super::diagnostics::{build_diagnostics, FitDiagnostics};
use super::{difference, ForecastModel, ModelKind, Transform, DEFAULT_S_FLOOR};

/// Pass a series through the stage-2 filter: difference `d` times, remove
/// the AR part, invert the MA part. This is exactly the innovation
/// recursion with a zero constant.
fn arma_filter(series: &[f64], d: usize, phi: &[f64], theta: &[f64]) -> Vec<f64> {
    css_residuals(&difference(series, d), 0.0, phi, theta)
}

/// Fit a regression with ARIMA errors.
///
/// `train_z` holds one covariate row per training observation (no intercept
/// column; it is added internally). Covariate columns without variation are
/// excluded from estimation and carry a zero coefficient, so a degenerate
/// covariate matrix gracefully reduces the model to a plain ARIMA fit.
/// When `d ≥ 1` the intercept is unidentifiable after differencing and the
/// stage-1 estimate is kept.
pub fn fit_regarima(
    train_y: &[f64],
    train_z: &[Vec<f64>],
    p_max: usize,
    d_max: usize,
    q_max: usize,
) -> Result<(ForecastModel, FitDiagnostics)> {
    if train_z.len() != train_y.len() {
        return Err(Error::Alignment(format!(
            "response has {} rows but covariates have {}",
            train_y.len(),
            train_z.len()
        )));
    }
    let n = train_y.len();
    let needed = p_max + d_max + q_max + 11;
    if n < needed {
        return Err(Error::InsufficientData {
            context: "regression with ARIMA errors",
            needed,
            got: n,
        });
    }
    let n_cols = train_z.first().map_or(0, Vec::len);
    for (i, row) in train_z.iter().enumerate() {
        if row.len() != n_cols {
            return Err(Error::Alignment(format!(
                "covariate row {i} has {} entries, expected {n_cols}",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::MissingCovariate(format!(
                "covariate row {i} contains a non-finite value"
            )));
        }
    }

    // Columns with no variation cannot be estimated; they keep a zero
    // coefficient, and the intercept absorbs their constant contribution…
    // which is zero too, because a varying-free column shifted into the
    // intercept is indistinguishable from the intercept itself.
    let kept: Vec<usize> = (0..n_cols)
        .filter(|&j| {
            let col: Vec<f64> = train_z.iter().map(|row| row[j]).collect();
            stats::sum_sq_dev(&col, stats::mean(&col)) > 0.0
        })
        .collect();

    // Stage 1: ordinary least squares on [1, kept columns].
    let design: Vec<Vec<f64>> = train_z
        .iter()
        .map(|row| {
            let mut r = Vec::with_capacity(1 + kept.len());
            r.push(1.0);
            r.extend(kept.iter().map(|&j| row[j]));
            r
        })
        .collect();
    let ols = linalg::least_squares(&design, train_y)?;
    let ols_residuals = linalg::residuals(&design, train_y, &ols);

    // Stage 2: ARIMA order search on the regression residuals.
    let (error_model, _) = auto_arima(&ols_residuals, p_max, d_max, q_max)?;
    let (p, d, q) = (error_model.p, error_model.d, error_model.q);

    // Stage 3: generalized-differencing re-estimation of the coefficients.
    // Only runs when there are slopes to re-estimate; an intercept-only
    // regression is already exactly the centering the error model assumes.
    let mut beta_kept = ols[1..].to_vec();
    let mut intercept = ols[0];
    if !kept.is_empty() {
        let filtered_y = arma_filter(train_y, d, &error_model.phi, &error_model.theta);
        let refit_intercept = d == 0;
        let mut filtered_design: Vec<Vec<f64>> = Vec::with_capacity(filtered_y.len());
        // Filter each design column through the identical recursion.
        let mut columns: Vec<Vec<f64>> = Vec::new();
        if refit_intercept {
            columns.push(arma_filter(&vec![1.0; n], d, &error_model.phi, &error_model.theta));
        }
        for &j in &kept {
            let col: Vec<f64> = train_z.iter().map(|row| row[j]).collect();
            columns.push(arma_filter(&col, d, &error_model.phi, &error_model.theta));
        }
        if !columns.is_empty() {
            for t in 0..filtered_y.len() {
                filtered_design.push(columns.iter().map(|c| c[t]).collect());
            }
            let refit = linalg::least_squares(&filtered_design, &filtered_y)?;
            if refit_intercept {
                intercept = refit[0];
                beta_kept = refit[1..].to_vec();
            } else {
                beta_kept = refit;
            }
        }
    }
    let mut beta = vec![0.0; 1 + n_cols];
    beta[0] = intercept;
    for (slot, &j) in kept.iter().enumerate() {
        beta[1 + j] = beta_kept[slot];
    }

    // Final residuals: regression errors passed through the stage-2 model
    // with its coefficients held fixed.
    let eta: Vec<f64> = train_y
        .iter()
        .zip(train_z)
        .map(|(&y, row)| {
            y - beta[0]
                - beta[1..]
                    .iter()
                    .zip(row)
                    .map(|(b, v)| b * v)
                    .sum::<f64>()
        })
        .collect();
    let w_eta = difference(&eta, d);
    let residuals = css_residuals(&w_eta, error_model.constant, &error_model.phi, &error_model.theta);
    let n_eff = residuals.len();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let sigma2 = (rss / n_eff as f64).max(DEFAULT_S_FLOOR * DEFAULT_S_FLOOR);
    let k_params = p + q + 2 + 1 + kept.len();
    let aic = n_eff as f64 * sigma2.ln() + 2.0 * k_params as f64;

    let model = ForecastModel {
        kind: ModelKind::RegArima,
        p,
        d,
        q,
        constant: error_model.constant,
        phi: error_model.phi,
        theta: error_model.theta,
        beta,
        s: sigma2.sqrt(),
        train_len: n,
        k_params,
        training_transform: Transform::Log,
    };
    let diagnostics = build_diagnostics(aic, rss, &residuals, p + q, &w_eta);
    Ok((model, diagnostics))
}
