//! Small dense least-squares solver.
//!
//! The regression designs in this crate are tall and thin (thousands of rows,
//! at most a dozen columns), so a Householder QR factorization is accurate
//! and more than fast enough, and avoids the conditioning loss of normal
//! equations.

use crate::error::{Error, Result};

/// Solve `min_beta ||X beta − y||²` for a tall design matrix given as rows.
///
/// Returns the coefficient vector, one entry per column of `rows`. Errors
/// when the design has fewer rows than columns or is rank deficient
/// (collinear columns).
pub fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::InsufficientData {
            context: "least squares",
            needed: 1,
            got: 0,
        });
    }
    let m = rows[0].len();
    if m == 0 {
        return Ok(Vec::new());
    }
    if y.len() != n {
        return Err(Error::Alignment(format!(
            "design has {n} rows but response has {} entries",
            y.len()
        )));
    }
    if n < m {
        return Err(Error::InsufficientData {
            context: "least squares",
            needed: m,
            got: n,
        });
    }
    // Column-major working copy of X, plus a copy of y; both are reduced in
    // place by successive Householder reflections.
    let mut a = vec![0.0_f64; n * m];
    for (i, row) in rows.iter().enumerate() {
        if row.len() != m {
            return Err(Error::Alignment(format!(
                "design row {i} has {} columns, expected {m}",
                row.len()
            )));
        }
        for (j, &v) in row.iter().enumerate() {
            a[j * n + i] = v;
        }
    }
    let mut b = y.to_vec();

    let mut col_scale = 0.0_f64;
    for &v in &a {
        col_scale = col_scale.max(v.abs());
    }
    if col_scale == 0.0 {
        return Err(Error::Collinear("design matrix is identically zero".into()));
    }

    for j in 0..m {
        // Build the Householder vector for column j below the diagonal.
        let col = &a[j * n..(j + 1) * n];
        let norm = col[j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= col_scale * 1e-12 * (n as f64).sqrt() {
            return Err(Error::Collinear(format!(
                "design column {j} is linearly dependent on earlier columns"
            )));
        }
        let alpha = if col[j] >= 0.0 { -norm } else { norm };
        let mut v = vec![0.0_f64; n - j];
        v[0] = col[j] - alpha;
        v[1..].copy_from_slice(&col[j + 1..]);
        let vtv = v.iter().map(|x| x * x).sum::<f64>();
        if vtv == 0.0 {
            // Column already reduced; just record the diagonal.
            continue;
        }
        // Apply I − 2vvᵀ/vᵀv to the remaining columns and to b.
        for jj in j..m {
            let col_jj = &mut a[jj * n..(jj + 1) * n];
            let dot: f64 = v
                .iter()
                .zip(&col_jj[j..])
                .map(|(vi, ci)| vi * ci)
                .sum();
            let factor = 2.0 * dot / vtv;
            for (vi, ci) in v.iter().zip(&mut col_jj[j..]) {
                *ci -= factor * vi;
            }
        }
        let dot: f64 = v.iter().zip(&b[j..]).map(|(vi, bi)| vi * bi).sum();
        let factor = 2.0 * dot / vtv;
        for (vi, bi) in v.iter().zip(&mut b[j..]) {
            *bi -= factor * vi;
        }
    }

    // Back-substitute through the triangular factor.
    let mut beta = vec![0.0_f64; m];
    for j in (0..m).rev() {
        let mut acc = b[j];
        for jj in j + 1..m {
            acc -= a[jj * n + j] * beta[jj];
        }
        let diag = a[j * n + j];
        if diag.abs() <= col_scale * 1e-12 {
            return Err(Error::Collinear(format!(
                "design column {j} is linearly dependent on earlier columns"
            )));
        }
        beta[j] = acc / diag;
    }
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "least-squares solution is not finite".into(),
        ));
    }
    Ok(beta)
}

/// Residuals `y − X beta` for a design given as rows.
pub fn residuals(rows: &[Vec<f64>], y: &[f64], beta: &[f64]) -> Vec<f64> {
    rows.iter()
        .zip(y)
        .map(|(row, &yi)| yi - row.iter().zip(beta).map(|(x, b)| x * b).sum::<f64>())
        .collect()
}
