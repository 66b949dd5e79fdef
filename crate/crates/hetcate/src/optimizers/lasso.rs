//! Cyclic coordinate-descent lasso with covariance (Gram) updates.
//!
//! The user-facing objective is the un-halved mean square
//!
//! ```text
//!     |S|^-1 sum_{i in S} (y_i - x_i . alpha)^2  +  lambda * ||alpha_pen||_1
//! ```
//!
//! over a row subset `S`. Internally the solver minimizes the halved form
//! `mean(0.5 (y - x.alpha)^2) + (lambda/2) ||alpha_pen||_1`, whose argmin is
//! identical; the factor-of-2 mapping happens once at the API boundary so
//! user-supplied lambdas keep the un-halved convention. All KKT quantities
//! below are stated in the internal (halved) convention.
//!
//! The intercept column (index 0) is unpenalized by default: data are not
//! centered and the intercept is structurally present, so penalizing it
//! would bias level estimates.

use ndarray::Array2;

use crate::error::Error;

pub(crate) const MAX_SWEEPS: usize = 10_000;
pub(crate) const COEF_TOL: f64 = 1e-8;
pub(crate) const KKT_TARGET: f64 = 1e-7;

/// Iteration budget and tolerances for one solve.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SolveSettings {
    pub max_sweeps: usize,
    pub coef_tol: f64,
    pub kkt_target: f64,
}

impl SolveSettings {
    /// Full precision: KKT-certified fits returned to callers.
    pub(crate) fn strict() -> Self {
        Self {
            max_sweeps: MAX_SWEEPS,
            coef_tol: COEF_TOL,
            kkt_target: KKT_TARGET,
        }
    }

    /// Loose settings for path fits inside cross-validation, where the loss
    /// curve is compared across lambdas at ~1e-2 resolution and solving to
    /// machine precision is wasted work.
    pub(crate) fn cv() -> Self {
        Self {
            max_sweeps: 1_500,
            coef_tol: 1e-6,
            kkt_target: 1e-4,
        }
    }
}

/// A fitted lasso solution together with its KKT certificate.
#[derive(Debug, Clone)]
pub struct LassoFit {
    /// Coefficient vector, one entry per design column.
    pub coefficients: Vec<f64>,
    /// The lambda that was solved for, on the un-halved objective scale.
    pub lambda: f64,
    /// True when column 0 was left out of the penalty.
    pub intercept_unpenalized: bool,
    /// Number of rows in the training subset.
    pub n_used: usize,
    /// False when the sweep budget ran out before the tolerance was met;
    /// callers must surface a warning rather than silently proceed.
    pub converged: bool,
    /// Max KKT violation of the internal halved objective at the solution.
    pub kkt_residual: f64,
}

impl LassoFit {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        row.iter()
            .zip(&self.coefficients)
            .map(|(x, c)| x * c)
            .sum()
    }
}

/// Precomputed Gram quantities for one training subset. Building this once
/// makes warm-started lambda paths (and cross-validation) cheap: a full
/// coordinate sweep costs O(d^2) regardless of the subset size.
pub(crate) struct GramProblem {
    /// X'X over the subset, d x d.
    gram: Array2<f64>,
    /// X'y over the subset.
    xty: Vec<f64>,
    /// y'y over the subset (objective bookkeeping for the monotonicity
    /// assertion; debug builds only).
    #[cfg(debug_assertions)]
    yty: f64,
    pub(crate) n_rows: f64,
    dim: usize,
}

impl GramProblem {
    pub(crate) fn build(x: &Array2<f64>, y: &[f64], subset: &[usize]) -> Self {
        let d = x.ncols();
        let mut gram = Array2::<f64>::zeros((d, d));
        let mut xty = vec![0.0; d];
        #[cfg(debug_assertions)]
        let mut yty = 0.0;
        for &i in subset {
            let row = x.row(i);
            let yi = y[i];
            #[cfg(debug_assertions)]
            {
                yty += yi * yi;
            }
            for j in 0..d {
                let xij = row[j];
                if xij == 0.0 {
                    continue;
                }
                xty[j] += xij * yi;
                // fill the upper triangle, mirror afterwards
                for l in j..d {
                    gram[[j, l]] += xij * row[l];
                }
            }
        }
        for j in 0..d {
            for l in (j + 1)..d {
                gram[[l, j]] = gram[[j, l]];
            }
        }
        Self {
            gram,
            xty,
            #[cfg(debug_assertions)]
            yty,
            n_rows: subset.len() as f64,
            dim: d,
        }
    }

    /// Internal halved objective at `coef`, given `q = gram . coef`.
    #[cfg(debug_assertions)]
    fn objective(&self, coef: &[f64], q: &[f64], lambda_int: f64, penalize_intercept: bool) -> f64 {
        let mut quad = 0.0;
        let mut lin = 0.0;
        let mut l1 = 0.0;
        for j in 0..self.dim {
            quad += coef[j] * q[j];
            lin += coef[j] * self.xty[j];
            if j > 0 || penalize_intercept {
                l1 += coef[j].abs();
            }
        }
        (0.5 * quad - lin + 0.5 * self.yty) / self.n_rows + lambda_int * l1
    }

    /// Gradient of the internal halved mean-square at `coef` (via `q`).
    fn gradient(&self, q: &[f64], j: usize) -> f64 {
        (q[j] - self.xty[j]) / self.n_rows
    }

    /// Max KKT violation at `coef` for penalty level `lambda_int`.
    pub(crate) fn kkt_residual(
        &self,
        coef: &[f64],
        q: &[f64],
        lambda_int: f64,
        penalize_intercept: bool,
    ) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.dim {
            let g = self.gradient(q, j);
            let penalized = j > 0 || penalize_intercept;
            let violation = if !penalized {
                g.abs()
            } else if coef[j] == 0.0 {
                (g.abs() - lambda_int).max(0.0)
            } else {
                (g + lambda_int * coef[j].signum()).abs()
            };
            worst = worst.max(violation);
        }
        worst
    }

    /// Runs cyclic coordinate descent from the warm start in `coef`,
    /// maintaining `q = gram . coef`. Returns (converged, kkt_residual).
    pub(crate) fn solve(
        &self,
        lambda_int: f64,
        penalize_intercept: bool,
        coef: &mut [f64],
        q: &mut [f64],
        settings: SolveSettings,
    ) -> (bool, f64) {
        debug_assert_eq!(coef.len(), self.dim);
        let mut sweeps = 0;
        #[cfg(debug_assertions)]
        let mut prev_obj = self.objective(coef, q, lambda_int, penalize_intercept);

        loop {
            // full pass over all coordinates, then settle the active set
            let full_delta = self.sweep(lambda_int, penalize_intercept, coef, q, false);
            sweeps += 1;
            #[cfg(debug_assertions)]
            {
                let obj = self.objective(coef, q, lambda_int, penalize_intercept);
                debug_assert!(
                    obj <= prev_obj + 1e-10 * (1.0 + prev_obj.abs()),
                    "coordinate sweep increased the objective: {prev_obj} -> {obj}"
                );
                prev_obj = obj;
            }
            if full_delta < settings.coef_tol {
                let kkt = self.kkt_residual(coef, q, lambda_int, penalize_intercept);
                if kkt <= settings.kkt_target || sweeps >= settings.max_sweeps {
                    return (sweeps < settings.max_sweeps, kkt);
                }
            }
            while sweeps < settings.max_sweeps {
                let delta = self.sweep(lambda_int, penalize_intercept, coef, q, true);
                sweeps += 1;
                if delta < settings.coef_tol {
                    break;
                }
            }
            if sweeps >= settings.max_sweeps {
                let kkt = self.kkt_residual(coef, q, lambda_int, penalize_intercept);
                return (false, kkt);
            }
        }
    }

    /// One coordinate sweep; returns max |coefficient change|.
    fn sweep(
        &self,
        lambda_int: f64,
        penalize_intercept: bool,
        coef: &mut [f64],
        q: &mut [f64],
        active_only: bool,
    ) -> f64 {
        let mut max_delta: f64 = 0.0;
        for j in 0..self.dim {
            let old = coef[j];
            if active_only && old == 0.0 {
                continue;
            }
            let v = self.gram[[j, j]] / self.n_rows;
            if v <= 0.0 {
                // all-zero column on this subset; keep the coefficient at 0
                if old != 0.0 {
                    coef[j] = 0.0;
                    max_delta = max_delta.max(old.abs());
                }
                continue;
            }
            // partial residual correlation with column j
            let rho = (self.xty[j] - q[j]) / self.n_rows + v * old;
            let new = if j > 0 || penalize_intercept {
                soft_threshold(rho, lambda_int) / v
            } else {
                rho / v
            };
            let delta = new - old;
            if delta != 0.0 {
                let col = self.gram.row(j);
                for (ql, gl) in q.iter_mut().zip(col.iter()) {
                    *ql += delta * gl;
                }
                coef[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        max_delta
    }
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

fn check_inputs(x: &Array2<f64>, y: &[f64], subset: &[usize], lambda: f64) -> Result<(), Error> {
    if subset.is_empty() {
        return Err(Error::invalid("lasso subset must be non-empty"));
    }
    if lambda < 0.0 {
        return Err(Error::invalid("lambda must be non-negative"));
    }
    if y.len() != x.nrows() {
        return Err(Error::invalid(format!(
            "target length {} does not match {} design rows",
            y.len(),
            x.nrows()
        )));
    }
    if let Some(&bad) = subset.iter().find(|&&i| i >= x.nrows()) {
        return Err(Error::invalid(format!("subset index {bad} out of range")));
    }
    Ok(())
}

/// Fits the lasso on the rows of `x` selected by `subset`.
///
/// `lambda` is on the un-halved mean-square scale. Non-convergence is not an
/// error: the fit is returned with `converged = false`.
pub fn fit_lasso(
    x: &Array2<f64>,
    y: &[f64],
    subset: &[usize],
    lambda: f64,
    penalize_intercept: bool,
) -> Result<LassoFit, Error> {
    check_inputs(x, y, subset, lambda)?;
    let problem = GramProblem::build(x, y, subset);
    let mut coef = vec![0.0; x.ncols()];
    let mut q = vec![0.0; x.ncols()];
    let (converged, kkt) = problem.solve(
        lambda / 2.0,
        penalize_intercept,
        &mut coef,
        &mut q,
        SolveSettings::strict(),
    );
    Ok(LassoFit {
        coefficients: coef,
        lambda,
        intercept_unpenalized: !penalize_intercept,
        n_used: subset.len(),
        converged,
        kkt_residual: kkt,
    })
}

/// Fits a warm-started path over a descending lambda grid, reusing one Gram
/// factorization. Returns one fit per lambda, in grid order.
pub fn lasso_path(
    x: &Array2<f64>,
    y: &[f64],
    subset: &[usize],
    lambdas_desc: &[f64],
    penalize_intercept: bool,
) -> Result<Vec<LassoFit>, Error> {
    lasso_path_with(
        x,
        y,
        subset,
        lambdas_desc,
        penalize_intercept,
        SolveSettings::strict(),
    )
}

pub(crate) fn lasso_path_with(
    x: &Array2<f64>,
    y: &[f64],
    subset: &[usize],
    lambdas_desc: &[f64],
    penalize_intercept: bool,
    settings: SolveSettings,
) -> Result<Vec<LassoFit>, Error> {
    check_inputs(x, y, subset, lambdas_desc.first().copied().unwrap_or(0.0))?;
    let problem = GramProblem::build(x, y, subset);
    let mut coef = vec![0.0; x.ncols()];
    let mut q = vec![0.0; x.ncols()];
    let mut out = Vec::with_capacity(lambdas_desc.len());
    for &lambda in lambdas_desc {
        let (converged, kkt) = problem.solve(
            lambda / 2.0,
            penalize_intercept,
            &mut coef,
            &mut q,
            settings,
        );
        out.push(LassoFit {
            coefficients: coef.clone(),
            lambda,
            intercept_unpenalized: !penalize_intercept,
            n_used: subset.len(),
            converged,
            kkt_residual: kkt,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Independent KKT check written against the raw design, not the Gram
    /// cache the solver uses.
    fn kkt_from_design(
        x: &Array2<f64>,
        y: &[f64],
        subset: &[usize],
        fit: &LassoFit,
    ) -> f64 {
        let lambda_int = fit.lambda / 2.0;
        let d = x.ncols();
        let n = subset.len() as f64;
        let mut worst: f64 = 0.0;
        for j in 0..d {
            let mut g = 0.0;
            for &i in subset {
                let pred = fit.predict_row(x.row(i).as_slice().unwrap());
                g += -x[[i, j]] * (y[i] - pred);
            }
            g /= n;
            let penalized = j > 0 || !fit.intercept_unpenalized;
            let violation = if !penalized {
                g.abs()
            } else if fit.coefficients[j] == 0.0 {
                (g.abs() - lambda_int).max(0.0)
            } else {
                (g + lambda_int * fit.coefficients[j].signum()).abs()
            };
            worst = worst.max(violation);
        }
        worst
    }

    #[test]
    fn zero_targets_give_zero_solution() {
        let x = array![[1.0, 0.4], [1.0, -1.2], [1.0, 0.7]];
        let fit = fit_lasso(&x, &[0.0, 0.0, 0.0], &[0, 1, 2], 0.1, false).unwrap();
        assert!(fit.converged);
        assert!(fit.coefficients.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn large_lambda_kills_all_penalized_coefficients() {
        // centered columns, penalized intercept: the all-zero vector is the
        // KKT solution once lambda exceeds the max absolute gradient of the
        // un-halved objective at zero, 2*max_j |mean(x_j y)|.
        let x = array![[1.0, 2.0], [-1.0, 0.0], [1.0, -2.0], [-1.0, 0.0]];
        let y = [1.0, 2.0, -1.0, 0.5];
        let threshold = {
            let d = x.ncols();
            (0..d)
                .map(|j| {
                    (0..4).map(|i| x[[i, j]] * y[i]).sum::<f64>().abs() / 4.0
                })
                .fold(0.0f64, f64::max)
                * 2.0
        };
        let fit = fit_lasso(&x, &y, &[0, 1, 2, 3], threshold + 1e-9, true).unwrap();
        assert!(fit.coefficients.iter().all(|&c| c == 0.0));
        let fit = fit_lasso(&x, &y, &[0, 1, 2, 3], threshold * 0.8, true).unwrap();
        assert!(fit.coefficients.iter().any(|&c| c != 0.0));
    }

    #[test]
    fn orthonormal_design_matches_soft_threshold_oracle() {
        // X'X / n = I on 5x5 identity-scaled designs: the solver must agree
        // with coef_j = soft_threshold(mean(x_j y), lambda/2) coordinatewise
        // (halved convention; the API lambda maps to a lambda/2 threshold).
        let scale = (5f64).sqrt();
        let mut x = Array2::<f64>::zeros((5, 5));
        for i in 0..5 {
            x[[i, i]] = scale;
        }
        let subset: Vec<usize> = (0..5).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let y: Vec<f64> = (0..5).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let lambda: f64 = rng.random_range(0.0..2.0);
            let fit = fit_lasso(&x, &y, &subset, lambda, true).unwrap();
            for j in 0..5 {
                let corr = x[[j, j]] * y[j] / 5.0; // mean(x_j y)
                let expected = soft_threshold(corr, lambda / 2.0);
                assert_abs_diff_eq!(fit.coefficients[j], expected, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn kkt_certified_on_random_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..20 {
            let n = 40;
            let d = 8;
            let mut x = Array2::<f64>::zeros((n, d));
            for i in 0..n {
                x[[i, 0]] = 1.0;
                for j in 1..d {
                    x[[i, j]] = rng.sample::<f64, _>(StandardNormal);
                }
            }
            let y: Vec<f64> = (0..n)
                .map(|i| x[[i, 1]] - 0.5 * x[[i, 3]] + 0.1 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let subset: Vec<usize> = (0..n).collect();
            let lambda = 0.05 + 0.1 * (trial as f64 % 5.0);
            let fit = fit_lasso(&x, &y, &subset, lambda, false).unwrap();
            assert!(fit.converged);
            assert!(fit.kkt_residual <= 1e-6, "kkt {}", fit.kkt_residual);
            let independent = kkt_from_design(&x, &y, &subset, &fit);
            assert!(independent <= 1e-6, "independent kkt {independent}");
        }
    }

    #[test]
    fn permutation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 30;
        let d = 4;
        let mut x = Array2::<f64>::zeros((n, d));
        for i in 0..n {
            x[[i, 0]] = 1.0;
            for j in 1..d {
                x[[i, j]] = rng.sample::<f64, _>(StandardNormal);
            }
        }
        let y: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let forward: Vec<usize> = (0..n).collect();
        let backward: Vec<usize> = (0..n).rev().collect();
        let a = fit_lasso(&x, &y, &forward, 0.07, false).unwrap();
        let b = fit_lasso(&x, &y, &backward, 0.07, false).unwrap();
        for (ca, cb) in a.coefficients.iter().zip(&b.coefficients) {
            assert_abs_diff_eq!(ca, cb, epsilon = 1e-10);
        }
    }

    #[test]
    fn lambda_monotonicity_of_l1_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 50;
        let d = 6;
        let mut x = Array2::<f64>::zeros((n, d));
        for i in 0..n {
            x[[i, 0]] = 1.0;
            for j in 1..d {
                x[[i, j]] = rng.sample::<f64, _>(StandardNormal);
            }
        }
        let y: Vec<f64> = (0..n)
            .map(|i| 2.0 * x[[i, 2]] + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let subset: Vec<usize> = (0..n).collect();
        let grid = [1.0, 0.5, 0.2, 0.1, 0.01];
        let fits = lasso_path(&x, &y, &subset, &grid, true).unwrap();
        let norms: Vec<f64> = fits
            .iter()
            .map(|f| f.coefficients.iter().map(|c| c.abs()).sum::<f64>())
            .collect();
        for w in norms.windows(2) {
            assert!(w[0] <= w[1] + 1e-8, "l1 norms not monotone: {norms:?}");
        }
    }

    #[test]
    fn unpenalized_intercept_absorbs_the_mean() {
        let x = array![[1.0], [1.0], [1.0], [1.0]];
        let y = [2.0, 4.0, 6.0, 8.0];
        let fit = fit_lasso(&x, &y, &[0, 1, 2, 3], 10.0, false).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0], 5.0, epsilon = 1e-10);
    }
}
