//! Residual diagnostics for fitted models: the Ljung–Box portmanteau test
//! and the bundle of fit statistics reported next to every model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Statistics describing one model fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Information criterion used by the order search (lower is better).
    pub aic: f64,
    /// Sum of squared training innovations.
    pub rss: f64,
    /// Ljung–Box statistic of the training residuals.
    pub ljung_box_q: f64,
    /// Ljung–Box p-value; small values mean the residuals still carry
    /// autocorrelation the model failed to absorb.
    pub ljung_box_pvalue: f64,
    /// Partial autocorrelations of the (differenced) training series.
    pub pacf: Vec<f64>,
}

/// Ljung–Box portmanteau test for residual autocorrelation.
///
/// `Q = n(n+2) Σ_{k=1..h} ρ̂_k²/(n−k)`, referred to a chi-squared
/// distribution with `h − fitted_params` degrees of freedom.
pub fn ljung_box(residuals: &[f64], h: usize, fitted_params: usize) -> Result<(f64, f64)> {
    if h <= fitted_params {
        return Err(Error::InvalidDof(format!(
            "portmanteau lag count {h} must exceed the {fitted_params} fitted parameters"
        )));
    }
    if residuals.len() < h + 2 {
        return Err(Error::InsufficientData {
            context: "portmanteau test",
            needed: h + 2,
            got: residuals.len(),
        });
    }
    let acf = stats::sample_acf(residuals, h)?;
    let n = residuals.len() as f64;
    let q = n * (n + 2.0)
        * acf
            .iter()
            .enumerate()
            .map(|(i, rho)| rho * rho / (n - (i + 1) as f64))
            .sum::<f64>();
    let pvalue = stats::chi_squared_survival(q, (h - fitted_params) as f64)?;
    Ok((q, pvalue))
}

/// Assemble the diagnostics bundle for a fit.
///
/// The portmanteau lag count is `min(10, n−2)`, raised just past the fitted
/// parameter count when necessary. Degenerate residuals (all zero, or too
/// few) cannot reject whiteness, so they record `Q = 0`, p-value 1 rather
/// than failing the whole fit.
pub(crate) fn build_diagnostics(
    aic: f64,
    rss: f64,
    residuals: &[f64],
    fitted_params: usize,
    differenced: &[f64],
) -> FitDiagnostics {
    let n = residuals.len();
    let mut h = 10.min(n.saturating_sub(2));
    if h <= fitted_params {
        h = (fitted_params + 1).min(n.saturating_sub(2));
    }
    let (ljung_box_q, ljung_box_pvalue) = if h > fitted_params {
        ljung_box(residuals, h, fitted_params).unwrap_or((0.0, 1.0))
    } else {
        (0.0, 1.0)
    };
    let max_lag = 10.min(differenced.len().saturating_sub(2));
    let pacf = if max_lag >= 1 {
        super::pacf(differenced, max_lag).unwrap_or_default()
    } else {
        Vec::new()
    };
    FitDiagnostics {
        aic,
        rss,
        ljung_box_q,
        ljung_box_pvalue,
        pacf,
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::*;

    #[test]
    fn statistic_matches_a_hand_computation() {
        // Residuals [1,2,3,4]: lag-1 autocorrelation 0.25, so
        // Q = 4·6·0.25²/3 = 0.5.
        let (q, pvalue) = ljung_box(&[1.0, 2.0, 3.0, 4.0], 1, 0).unwrap();
        assert!((q - 0.5).abs() < 1e-12, "q = {q}");
        assert!((0.0..=1.0).contains(&pvalue));
    }

    #[test]
    fn white_noise_residuals_are_not_rejected() {
        let xs = simulate_white_noise(1.0, 1_000, 89);
        let (_, pvalue) = ljung_box(&xs, 10, 0).unwrap();
        assert!(pvalue > 0.01, "pvalue = {pvalue}");
    }

    #[test]
    fn strongly_autocorrelated_residuals_are_rejected() {
        let xs = simulate_arma(0.0, &[0.9], &[], 1.0, 1_000, 97);
        let (_, pvalue) = ljung_box(&xs, 10, 0).unwrap();
        assert!(pvalue < 0.001, "pvalue = {pvalue}");
    }

    #[test]
    fn degenerate_and_misconfigured_inputs_error() {
        assert!(matches!(
            ljung_box(&[0.0; 100], 10, 0),
            Err(crate::error::Error::DegenerateSeries(_))
        ));
        assert!(matches!(
            ljung_box(&simulate_white_noise(1.0, 100, 1), 3, 3),
            Err(crate::error::Error::InvalidDof(_))
        ));
        assert!(ljung_box(&[1.0, 2.0], 1, 0).is_err());
    }

    #[test]
    fn diagnostics_builder_survives_degenerate_residuals() {
        let d = build_diagnostics(-10.0, 0.0, &[0.0; 50], 2, &[0.0; 50]);
        assert_eq!(d.ljung_box_q, 0.0);
        assert_eq!(d.ljung_box_pvalue, 1.0);
        assert!(d.pacf.is_empty());
        assert_eq!(d.aic, -10.0);
    }
}
