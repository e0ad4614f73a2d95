//! Shared statistical helpers: moments, autocorrelation, partial
//! autocorrelation, reference-distribution quantiles, and polynomial
//! stability checks used by the forecasting models.

use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Arithmetic mean. Zero for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sum of squared deviations from `center`.
pub fn sum_sq_dev(xs: &[f64], center: f64) -> f64 {
    xs.iter().map(|x| (x - center) * (x - center)).sum()
}

/// Sample autocorrelations at lags `1..=max_lag`.
///
/// Uses the standard biased estimator
/// `ρ̂_k = Σ_{t=k+1..n} (x_t−x̄)(x_{t−k}−x̄) / Σ_t (x_t−x̄)²`.
pub fn sample_acf(xs: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if xs.len() <= max_lag + 1 {
        return Err(Error::InsufficientData {
            context: "sample autocorrelation",
            needed: max_lag + 2,
            got: xs.len(),
        });
    }
    let m = mean(xs);
    let denom = sum_sq_dev(xs, m);
    if denom <= 0.0 || !denom.is_finite() {
        return Err(Error::DegenerateSeries(
            "autocorrelation of a zero-variance series is undefined".into(),
        ));
    }
    let n = xs.len();
    let mut acf = Vec::with_capacity(max_lag);
    for k in 1..=max_lag {
        let mut num = 0.0;
        for t in k..n {
            num += (xs[t] - m) * (xs[t - k] - m);
        }
        acf.push(num / denom);
    }
    Ok(acf)
}

/// Partial autocorrelations at lags `1..=acf.len()` from sample
/// autocorrelations, via the Durbin–Levinson recursion.
pub fn pacf_from_acf(acf: &[f64]) -> Result<Vec<f64>> {
    let max_lag = acf.len();
    let mut pacf = Vec::with_capacity(max_lag);
    if max_lag == 0 {
        return Ok(pacf);
    }
    // rho[0] = 1 simplifies indexing below.
    let mut rho = Vec::with_capacity(max_lag + 1);
    rho.push(1.0);
    rho.extend_from_slice(acf);

    let mut prev = vec![0.0_f64; max_lag + 1];
    prev[1] = rho[1];
    pacf.push(rho[1]);
    let mut cur = vec![0.0_f64; max_lag + 1];
    for m in 2..=max_lag {
        let mut num = rho[m];
        let mut den = 1.0;
        for j in 1..m {
            num -= prev[j] * rho[m - j];
            den -= prev[j] * rho[j];
        }
        if den.abs() < 1e-14 || !den.is_finite() {
            return Err(Error::Numerical(format!(
                "partial autocorrelation recursion broke down at lag {m}"
            )));
        }
        let k = num / den;
        for j in 1..m {
            cur[j] = prev[j] - k * prev[m - j];
        }
        cur[m] = k;
        prev[..=m].copy_from_slice(&cur[..=m]);
        pacf.push(k);
    }
    Ok(pacf)
}

/// Interpolated sample median of an ascending-sorted slice: the middle value
/// for odd lengths, the mean of the two middle values for even lengths.
pub fn median_of_sorted(sorted: &[f64]) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::InsufficientData {
            context: "median",
            needed: 1,
            got: 0,
        });
    }
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    })
}

/// Upper `alpha/2` critical value of Student's t with `dof` degrees of
/// freedom, i.e. the `1 − alpha/2` quantile.
pub fn student_t_critical(alpha: f64, dof: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "significance level must lie in (0, 1), got {alpha}"
        )));
    }
    if !(dof > 0.0) {
        return Err(Error::InvalidDof(format!(
            "Student-t degrees of freedom must be positive, got {dof}"
        )));
    }
    let dist = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::Numerical(format!("Student-t distribution: {e}")))?;
    Ok(dist.inverse_cdf(1.0 - alpha / 2.0))
}

/// Survival function `P(X > x)` of a chi-squared variable with `dof`
/// degrees of freedom.
pub fn chi_squared_survival(x: f64, dof: f64) -> Result<f64> {
    if !(dof > 0.0) {
        return Err(Error::InvalidDof(format!(
            "chi-squared degrees of freedom must be positive, got {dof}"
        )));
    }
    let dist = ChiSquared::new(dof)
        .map_err(|e| Error::Numerical(format!("chi-squared distribution: {e}")))?;
    Ok((1.0 - dist.cdf(x)).clamp(0.0, 1.0))
}

/// Largest reflection-coefficient magnitude of the autoregressive polynomial
/// `1 − a_1 z − … − a_p z^p`, computed by the step-down recursion.
///
/// The polynomial has all roots strictly outside the unit circle exactly
/// when this value is below one. When a level's coefficient already reaches
/// magnitude one the recursion cannot continue and that magnitude is
/// returned immediately — still ≥ 1, which is all stability checks and
/// penalty terms need. Non-finite coefficients yield `+∞`.
pub fn ar_max_reflection(coeffs: &[f64]) -> f64 {
    if coeffs.iter().any(|c| !c.is_finite()) {
        return f64::INFINITY;
    }
    let mut a = coeffs.to_vec();
    let mut max_k = 0.0_f64;
    for m in (1..=a.len()).rev() {
        let k = a[m - 1];
        if !(k.abs() < 1.0) {
            return k.abs().max(1.0);
        }
        max_k = max_k.max(k.abs());
        if m > 1 {
            let denom = 1.0 - k * k;
            let prev: Vec<f64> = (0..m - 1)
                .map(|j| (a[j] + k * a[m - 2 - j]) / denom)
                .collect();
            a[..m - 1].copy_from_slice(&prev);
        }
    }
    max_k
}

/// True when the autoregressive polynomial `1 − a_1 z − … − a_p z^p` has all
/// roots strictly outside the unit circle.
pub fn ar_poly_is_stable(coeffs: &[f64]) -> bool {
    ar_max_reflection(coeffs) < 1.0
}

/// True when the moving-average polynomial `1 + θ_1 z + … + θ_q z^q` has all
/// roots strictly outside the unit circle (the model is invertible).
pub fn ma_poly_is_invertible(theta: &[f64]) -> bool {
    let negated: Vec<f64> = theta.iter().map(|t| -t).collect();
    ar_poly_is_stable(&negated)
}
