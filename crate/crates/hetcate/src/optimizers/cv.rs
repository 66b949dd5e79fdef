//! Cross-validated selection of the L1 penalty level.
//!
//! Theory fixes only the rate of the penalty (square-root-log over sample
//! size); the constant is picked by K-fold CV over a user grid. The default
//! grid used across the crate is 20 log-spaced multipliers c in [0.01, 10]
//! applied to the rate sqrt(log(d)/n).

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::stats::log1p_exp;

use super::lasso::{lasso_path_with, SolveSettings};
use super::logistic::logistic_lasso_path_with;

/// Which penalized problem the CV loss refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvProblem {
    /// Squared-error loss, lasso path.
    Lasso,
    /// Logistic deviance, logistic-lasso path.
    Logistic,
}

pub const DEFAULT_CV_FOLDS: usize = 5;
pub const DEFAULT_GRID_POINTS: usize = 20;
pub const DEFAULT_GRID_LO: f64 = 0.01;
pub const DEFAULT_GRID_HI: f64 = 10.0;

/// The default multiplier grid, descending.
pub fn default_c_grid() -> Vec<f64> {
    let lo = DEFAULT_GRID_LO.ln();
    let hi = DEFAULT_GRID_HI.ln();
    (0..DEFAULT_GRID_POINTS)
        .map(|i| (hi + (lo - hi) * i as f64 / (DEFAULT_GRID_POINTS - 1) as f64).exp())
        .collect()
}

/// Penalty rate sqrt(log(d)/n); multipliers from the grid scale this.
pub fn lambda_rate(dim: usize, n_rows: usize) -> f64 {
    ((dim.max(2) as f64).ln() / n_rows.max(1) as f64).sqrt()
}

/// Picks the grid value minimizing the mean cross-validated loss (squared
/// error or logistic deviance). The grid must be positive, strictly
/// descending, and non-empty; ties break toward the larger lambda.
pub fn select_lambda_cv(
    problem: CvProblem,
    x: &Array2<f64>,
    targets: &[f64],
    subset: &[usize],
    cv_folds: usize,
    grid: &[f64],
    seed: u64,
) -> Result<f64, Error> {
    if grid.is_empty() {
        return Err(Error::invalid("lambda grid must be non-empty"));
    }
    if grid.iter().any(|&l| l <= 0.0) {
        return Err(Error::invalid("lambda grid must be strictly positive"));
    }
    if grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("lambda grid must be strictly descending"));
    }
    if cv_folds < 2 {
        return Err(Error::invalid("cross-validation needs at least 2 folds"));
    }
    if subset.len() < cv_folds {
        return Err(Error::invalid(format!(
            "subset of {} rows is smaller than {} cv folds",
            subset.len(),
            cv_folds
        )));
    }
    if grid.len() == 1 {
        return Ok(grid[0]);
    }

    let mut shuffled: Vec<usize> = subset.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);

    let mut losses = vec![0.0f64; grid.len()];
    let base = shuffled.len() / cv_folds;
    let extra = shuffled.len() % cv_folds;
    let mut start = 0;
    for fold in 0..cv_folds {
        let size = base + usize::from(fold < extra);
        let held: Vec<usize> = shuffled[start..start + size].to_vec();
        let mut train: Vec<usize> = Vec::with_capacity(shuffled.len() - size);
        train.extend_from_slice(&shuffled[..start]);
        train.extend_from_slice(&shuffled[start + size..]);
        start += size;

        match problem {
            CvProblem::Lasso => {
                let fits = lasso_path_with(x, targets, &train, grid, false, SolveSettings::cv())?;
                for (g, fit) in fits.iter().enumerate() {
                    let mut loss = 0.0;
                    for &i in &held {
                        let pred = fit.predict_row(x.row(i).as_slice().unwrap());
                        let r = targets[i] - pred;
                        loss += r * r;
                    }
                    losses[g] += loss / held.len() as f64;
                }
            }
            CvProblem::Logistic => {
                let fits = logistic_lasso_path_with(x, targets, &train, grid, SolveSettings::cv())?;
                for (g, fit) in fits.iter().enumerate() {
                    let mut loss = 0.0;
                    for &i in &held {
                        let eta = fit.linear_predictor(x.row(i).as_slice().unwrap());
                        loss += log1p_exp(eta) - targets[i] * eta;
                    }
                    losses[g] += loss / held.len() as f64;
                }
            }
        }
    }

    // grid is descending, so the first strict minimum is the largest lambda
    let mut best = 0;
    for (g, &loss) in losses.iter().enumerate() {
        if loss < losses[best] {
            best = g;
        }
    }
    Ok(grid[best])
}
