//! Bounded least-squares refinement of per-period spreads.
//!
//! With the periods frozen and the amplitudes fixed by coverage, the spreads
//! `sigma_p` are fitted to the denoised histogram by a projected
//! Levenberg-Marquardt trust-region iteration inside
//! `[SIGMA_FLOOR, mu_p / 2]`.

use serde::{Deserialize, Serialize};

use crate::curves::{add_component, component_sigma_gradient, Coverage, SIGMA_FLOOR};
use crate::model::Model;

/// Objective evaluations allowed per fit.
pub const MAX_EVALUATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub sigmas: Vec<f64>,
    pub converged: bool,
    /// Set when the histogram had too few non-zero bins to fit.
    pub skipped: bool,
    /// `||hist - G||_2` at the returned spreads.
    pub residual_norm: f64,
    pub initial_residual_norm: f64,
    pub evaluations: usize,
}

/// Problem data shared by every evaluation.
struct Problem<'a> {
    hist: &'a [f64],
    periods: &'a [f64],
    model: Model,
    coverage: &'a Coverage,
    series_length: usize,
}

impl Problem<'_> {
    fn residual(&self, sigmas: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.hist.len()];
        for (&mu, &s) in self.periods.iter().zip(sigmas) {
            add_component(&mut g, self.model, mu, s, self.coverage, self.series_length);
        }
        self.hist.iter().zip(&g).skip(1).map(|(y, g)| y - g).collect()
    }

    /// Columns of `d residual / d sigma_p`.
    fn jacobian(&self, sigmas: &[f64]) -> Vec<Vec<f64>> {
        self.periods
            .iter()
            .zip(sigmas)
            .map(|(&mu, &s)| {
                let mut col = vec![0.0; self.hist.len()];
                component_sigma_gradient(&mut col, self.model, mu, s, self.coverage, self.series_length);
                col.into_iter().skip(1).map(|v| -v).collect()
            })
            .collect()
    }
}

fn half_sq(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves a small symmetric positive definite system by Gaussian
/// elimination with partial pivoting. Returns `None` when singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let pivot_row = a[col].clone();
        for row in col + 1..n {
            let f = a[row][col] / pivot_row[col];
            for (dst, src) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *dst -= f * src;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

/// Fits `sigma_p` for fixed `periods` to the lag-indexed `hist`, starting
/// from `initial`. Falls back to the starting point when the histogram has
/// fewer than three non-zero bins, and returns the starting point with
/// `converged = false` when the evaluation budget runs out.
pub fn fit_sigmas(
    hist: &[f64],
    periods: &[f64],
    initial: &[f64],
    model: Model,
    coverage: &Coverage,
    series_length: usize,
) -> FitResult {
    assert_eq!(periods.len(), initial.len(), "one starting sigma per period");
    let lower: Vec<f64> = periods.iter().map(|_| SIGMA_FLOOR).collect();
    let upper: Vec<f64> = periods.iter().map(|&mu| (mu / 2.0).max(SIGMA_FLOOR)).collect();
    let mut x: Vec<f64> = initial
        .iter()
        .zip(lower.iter().zip(&upper))
        .map(|(&s, (&lo, &hi))| s.clamp(lo, hi))
        .collect();

    let problem = Problem {
        hist,
        periods,
        model,
        coverage,
        series_length,
    };
    let mut r = problem.residual(&x);
    let mut cost = half_sq(&r);
    let initial_residual_norm = (2.0 * cost).sqrt();
    let mut evaluations = 1;

    let nonzero = hist.iter().skip(1).filter(|v| **v != 0.0).count();
    if nonzero < 3 || periods.is_empty() {
        return FitResult {
            sigmas: x,
            converged: false,
            skipped: true,
            residual_norm: initial_residual_norm,
            initial_residual_norm,
            evaluations,
        };
    }

    let n = periods.len();
    let mut lambda = -1.0;
    let mut nu = 2.0;
    let mut converged = false;
    let mut jac = problem.jacobian(&x);

    while evaluations < MAX_EVALUATIONS {
        // Gradient of 0.5 ||r||^2 and Gauss-Newton matrix.
        let grad: Vec<f64> = jac.iter().map(|col| dot(col, &r)).collect();
        let jtj: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| dot(&jac[i], &jac[j])).collect())
            .collect();

        // Coordinates pinned at a bound with the gradient pushing outward stay fixed.
        let free: Vec<usize> = (0..n)
            .filter(|&i| {
                let at_lower = x[i] <= lower[i] && grad[i] > 0.0;
                let at_upper = x[i] >= upper[i] && grad[i] < 0.0;
                !(at_lower || at_upper) && jtj[i][i] > 0.0
            })
            .collect();
        let projected_grad = free.iter().map(|&i| grad[i].abs()).fold(0.0, f64::max);
        if free.is_empty() || projected_grad <= 1e-10 * (1.0 + cost) {
            converged = true;
            break;
        }
        if lambda < 0.0 {
            lambda = 1e-3 * free.iter().map(|&i| jtj[i][i]).fold(0.0, f64::max);
        }

        let a: Vec<Vec<f64>> = free
            .iter()
            .map(|&i| {
                free.iter()
                    .map(|&j| {
                        if i == j {
                            jtj[i][j] * (1.0 + lambda) + lambda * 1e-12
                        } else {
                            jtj[i][j]
                        }
                    })
                    .collect()
            })
            .collect();
        let b: Vec<f64> = free.iter().map(|&i| -grad[i]).collect();
        let Some(step_free) = solve(a, b) else {
            lambda *= nu;
            nu *= 2.0;
            continue;
        };

        let mut candidate = x.clone();
        for (k, &i) in free.iter().enumerate() {
            candidate[i] = (x[i] + step_free[k]).clamp(lower[i], upper[i]);
        }
        let step: Vec<f64> = candidate.iter().zip(&x).map(|(c, o)| c - o).collect();
        let step_size = step.iter().map(|s| s.abs()).fold(0.0, f64::max);
        let scale = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if step_size <= 1e-9 * (1.0 + scale) {
            converged = true;
            break;
        }

        let jstep: f64 = {
            let mut quad = 0.0;
            for i in 0..n {
                for j in 0..n {
                    quad += step[i] * jtj[i][j] * step[j];
                }
            }
            quad
        };
        let predicted = -(dot(&step, &grad) + 0.5 * jstep);

        let r_new = problem.residual(&candidate);
        evaluations += 1;
        let cost_new = half_sq(&r_new);
        let actual = cost - cost_new;

        if actual > 0.0 && predicted > 0.0 {
            let rho = actual / predicted;
            x = candidate;
            r = r_new;
            let previous = cost;
            cost = cost_new;
            jac = problem.jacobian(&x);
            lambda *= (1.0f64 / 3.0).max(1.0 - (2.0 * rho - 1.0).powi(3));
            nu = 2.0;
            if actual <= 1e-12 * previous {
                converged = true;
                break;
            }
        } else {
            lambda *= nu;
            nu *= 2.0;
            if lambda > 1e20 {
                // No descent left inside the trust region.
                converged = true;
                break;
            }
        }
    }

    if !converged {
        // Budget exhausted: fall back to the starting spreads.
        let start: Vec<f64> = initial
            .iter()
            .zip(lower.iter().zip(&upper))
            .map(|(&s, (&lo, &hi))| s.clamp(lo, hi))
            .collect();
        return FitResult {
            sigmas: start,
            converged,
            skipped: false,
            residual_norm: initial_residual_norm,
            initial_residual_norm,
            evaluations,
        };
    }
    FitResult {
        sigmas: x,
        converged,
        skipped: false,
        residual_norm: (2.0 * cost).sqrt(),
        initial_residual_norm,
        evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::CurveParams;
    use crate::series::EventSeries;
    use proptest::prelude::*;

    fn synthetic(model: Model, periods: &[f64], sigmas: &[f64], n_t: usize) -> (Vec<f64>, Coverage) {
        let cov = Coverage::full(n_t);
        let p = CurveParams::new(model, periods.to_vec(), sigmas.to_vec(), n_t, 400);
        (p.curve(&cov), cov)
    }

    #[test]
    fn recovers_random_walk_sigma() {
        let (hist, cov) = synthetic(Model::RandomWalk, &[50.0], &[4.0], 5000);
        let fit = fit_sigmas(&hist, &[50.0], &[2.0], Model::RandomWalk, &cov, 5000);
        assert!(fit.converged);
        assert!((3.9..=4.1).contains(&fit.sigmas[0]), "{fit:?}");
        assert!(fit.evaluations <= MAX_EVALUATIONS);
    }

    #[test]
    fn recovers_two_clock_sigmas() {
        let (hist, cov) = synthetic(Model::Clock, &[40.0, 95.0], &[1.5, 6.0], 8000);
        let fit = fit_sigmas(&hist, &[40.0, 95.0], &[2.0, 2.0], Model::Clock, &cov, 8000);
        assert!(
            (fit.sigmas[0] - 1.5).abs() < 0.05 && (fit.sigmas[1] - 6.0).abs() < 0.05,
            "{fit:?}"
        );
    }

    #[test]
    fn bounds_are_respected() {
        // Data far wider than mu/2 pins the spread at the upper bound.
        let (hist, cov) = synthetic(Model::Clock, &[20.0], &[40.0], 4000);
        let fit = fit_sigmas(&hist, &[20.0], &[2.0], Model::Clock, &cov, 4000);
        assert!(fit.sigmas[0] <= 10.0 + 1e-12 && fit.sigmas[0] >= SIGMA_FLOOR);
        let (hist, cov) = synthetic(Model::Clock, &[20.0], &[0.1], 4000);
        let fit = fit_sigmas(&hist, &[20.0], &[3.0], Model::Clock, &cov, 4000);
        assert!(fit.sigmas[0] >= SIGMA_FLOOR);
    }

    #[test]
    fn degenerate_histogram_skips() {
        let mut hist = vec![0.0; 401];
        hist[50] = 3.0;
        hist[100] = 1.0;
        let cov = Coverage::full(1000);
        let fit = fit_sigmas(&hist, &[50.0], &[2.0], Model::Clock, &cov, 1000);
        assert!(fit.skipped && !fit.converged);
        assert_eq!(fit.sigmas, vec![2.0]);
    }

    #[test]
    fn deterministic() {
        let series = EventSeries::from_timestamps((1..=80).map(|i| i * 30 + (i * 7 % 5)), 3000).unwrap();
        let cov = Coverage::from_series(&series);
        let (hist, _) = synthetic(Model::RandomWalk, &[30.0], &[3.0], 3000);
        let a = fit_sigmas(&hist, &[30.0], &[1.0], Model::RandomWalk, &cov, 3000);
        let b = fit_sigmas(&hist, &[30.0], &[1.0], Model::RandomWalk, &cov, 3000);
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn never_worse_than_start(
            mu in 15.0f64..150.0,
            truth in 0.5f64..20.0,
            start in 0.5f64..30.0,
            rw in any::<bool>(),
            noise in proptest::collection::vec(0.0f64..2.0, 401),
        ) {
            let model = if rw { Model::RandomWalk } else { Model::Clock };
            let (mut hist, cov) = synthetic(model, &[mu], &[truth], 6000);
            for (h, e) in hist.iter_mut().zip(&noise).skip(1) {
                *h += e;
            }
            let fit = fit_sigmas(&hist, &[mu], &[start], model, &cov, 6000);
            prop_assert!(fit.residual_norm <= fit.initial_residual_norm + 1e-9);
            prop_assert!(fit.sigmas[0] >= SIGMA_FLOOR && fit.sigmas[0] <= (mu / 2.0).max(SIGMA_FLOOR));
        }
    }
}
