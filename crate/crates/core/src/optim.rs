//! Deterministic derivative-free minimization (Nelder–Mead simplex).
//!
//! The coefficient searches in this crate are low-dimensional (at most a
//! dozen parameters) over smooth penalized sum-of-squares surfaces, which is
//! exactly the regime the simplex method handles well. Everything here is
//! deterministic: fixed simplex construction, fixed coefficients, stable
//! tie-breaking — identical inputs always walk the identical path.

/// Options for [`minimize`]. The defaults suit coefficient vectors whose
/// optima live in roughly `[-2, 2]` per coordinate.
#[derive(Debug, Clone)]
pub struct Options {
    /// Edge length of the initial simplex along each axis.
    pub initial_step: f64,
    /// Stop when the simplex's best-to-worst objective spread falls below
    /// this, relative to the magnitude of the best value.
    pub f_tol: f64,
    /// Stop when the simplex collapses below this diameter per coordinate.
    pub x_tol: f64,
    /// Hard cap on objective evaluations per restart round.
    pub max_evals: usize,
    /// Number of rounds: after convergence the simplex is rebuilt around the
    /// incumbent best point with a smaller step and the search repeats.
    pub restarts: usize,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            initial_step: 0.1,
            f_tol: 1e-12,
            x_tol: 1e-10,
            max_evals: 2000,
            restarts: 2,
        }
    }
}

/// Result of a [`minimize`] call.
#[derive(Debug, Clone)]
pub struct Minimum {
    /// Best point found.
    pub x: Vec<f64>,
    /// Objective value at `x`.
    pub value: f64,
    /// Total objective evaluations across all rounds.
    pub evals: usize,
}

/// Minimize `f` from `start` with the Nelder–Mead simplex method.
///
/// Zero-dimensional problems return the start point untouched. The objective
/// may return non-finite values; they are treated as worse than any finite
/// value, so penalty-style constraint handling works.
pub fn minimize<F: FnMut(&[f64]) -> f64>(mut f: F, start: &[f64], opts: &Options) -> Minimum {
    let dim = start.len();
    let mut evals = 0usize;
    let mut eval = move |x: &[f64]| -> f64 {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    if dim == 0 {
        let value = eval(start);
        return Minimum {
            x: Vec::new(),
            value,
            evals: 1,
        };
    }

    let mut best_x = start.to_vec();
    let mut best_f = eval(&best_x);
    evals += 1;

    for round in 0..opts.restarts.max(1) {
        // Fresh axis-aligned simplex around the incumbent best point. Later
        // rounds use a smaller step to polish.
        let step = opts.initial_step / (10.0_f64).powi(round as i32);
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
        simplex.push((best_x.clone(), best_f));
        for i in 0..dim {
            let mut x = best_x.clone();
            x[i] += step;
            let fx = eval(&x);
            evals += 1;
            simplex.push((x, fx));
        }

        let round_budget = evals + opts.max_evals;
        while evals < round_budget {
            // Order best → worst; ties keep earlier entries first, which
            // pins the walk down deterministically.
            simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
            let f_best = simplex[0].1;
            let f_worst = simplex[dim].1;
            let spread = (f_worst - f_best).abs();
            let scale = f_best.abs().max(1.0);
            let diameter = (0..dim)
                .map(|i| {
                    simplex[1..]
                        .iter()
                        .map(|(x, _)| (x[i] - simplex[0].0[i]).abs())
                        .fold(0.0_f64, f64::max)
                })
                .fold(0.0_f64, f64::max);
            if spread <= opts.f_tol * scale && diameter <= opts.x_tol {
                break;
            }

            // Centroid of all points but the worst.
            let mut centroid = vec![0.0_f64; dim];
            for (x, _) in &simplex[..dim] {
                for (c, v) in centroid.iter_mut().zip(x) {
                    *c += v;
                }
            }
            for c in &mut centroid {
                *c /= dim as f64;
            }

            let worst = simplex[dim].clone();
            let reflected: Vec<f64> = centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + (c - w))
                .collect();
            let f_reflected = eval(&reflected);
            evals += 1;

            if f_reflected < simplex[0].1 {
                // Try to expand further along the same direction.
                let expanded: Vec<f64> = centroid
                    .iter()
                    .zip(&worst.0)
                    .map(|(c, w)| c + 2.0 * (c - w))
                    .collect();
                let f_expanded = eval(&expanded);
                evals += 1;
                simplex[dim] = if f_expanded < f_reflected {
                    (expanded, f_expanded)
                } else {
                    (reflected, f_reflected)
                };
            } else if f_reflected < simplex[dim - 1].1 {
                simplex[dim] = (reflected, f_reflected);
            } else {
                // Contract toward the centroid, outside or inside.
                let (contracted, f_contracted) = if f_reflected < worst.1 {
                    let point: Vec<f64> = centroid
                        .iter()
                        .zip(&reflected)
                        .map(|(c, r)| c + 0.5 * (r - c))
                        .collect();
                    let fv = eval(&point);
                    evals += 1;
                    (point, fv)
                } else {
                    let point: Vec<f64> = centroid
                        .iter()
                        .zip(&worst.0)
                        .map(|(c, w)| c + 0.5 * (w - c))
                        .collect();
                    let fv = eval(&point);
                    evals += 1;
                    (point, fv)
                };
                if f_contracted < worst.1.min(f_reflected) {
                    simplex[dim] = (contracted, f_contracted);
                } else {
                    // Shrink everything toward the best vertex.
                    let anchor = simplex[0].0.clone();
                    for entry in simplex.iter_mut().skip(1) {
                        for (v, a) in entry.0.iter_mut().zip(&anchor) {
                            *v = a + 0.5 * (*v - a);
                        }
                        entry.1 = eval(&entry.0);
                        evals += 1;
                    }
                }
            }
        }

        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        if simplex[0].1 < best_f {
            best_f = simplex[0].1;
            best_x = simplex[0].0.clone();
        }
    }

    Minimum {
        x: best_x,
        value: best_f,
        evals,
    }
}
