//! Pluggable nuisance learners behind a single `Predictor` interface.
//!
//! Four in-repo learners: the two L1-regularized parametric fits, gradient
//! boosted depth-1 regression trees (stumps), and k-nearest neighbors. The
//! boosted stumps capture additive nonlinearities (e.g. a squared covariate
//! in the outcome model) without any external dependency; users needing more
//! can implement `Predictor` themselves.

use std::str::FromStr;
use std::sync::Arc;

use ndarray::{Array2, ArrayView1};

use crate::error::Error;
use crate::seed::mix_seed;
use crate::stats::logistic;

use super::cv::{default_c_grid, lambda_rate, select_lambda_cv, CvProblem, DEFAULT_CV_FOLDS};
use super::lasso::fit_lasso;
use super::logistic::fit_logistic_lasso;

/// How an L1 penalty level is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaChoice {
    /// Use this value directly (un-halved objective scale).
    Fixed(f64),
    /// K-fold CV over `c * sqrt(log(d)/n)` for multipliers `c` in the grid
    /// (descending).
    CrossValidated { c_grid: Vec<f64>, cv_folds: usize },
}

impl Default for LambdaChoice {
    fn default() -> Self {
        LambdaChoice::CrossValidated {
            c_grid: default_c_grid(),
            cv_folds: DEFAULT_CV_FOLDS,
        }
    }
}

impl LambdaChoice {
    /// Resolves to a concrete lambda for a given problem size, running CV
    /// when needed.
    pub fn resolve(
        &self,
        problem: CvProblem,
        x: &Array2<f64>,
        targets: &[f64],
        subset: &[usize],
        seed: u64,
    ) -> Result<f64, Error> {
        match self {
            LambdaChoice::Fixed(l) => Ok(*l),
            LambdaChoice::CrossValidated { c_grid, cv_folds } => {
                let rate = lambda_rate(x.ncols(), subset.len());
                let grid: Vec<f64> = c_grid.iter().map(|c| c * rate).collect();
                select_lambda_cv(problem, x, targets, subset, *cv_folds, &grid, seed)
            }
        }
    }
}

/// Which nuisance learner to fit, with validated hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub enum NuisanceLearnerSpec {
    /// Lasso on the design columns; regression targets only.
    LassoLinear { lambda: LambdaChoice },
    /// Logistic lasso; probability targets only.
    LogisticLasso { lambda: LambdaChoice },
    /// Gradient boosted depth-1 trees; squared loss for regression, logistic
    /// loss for probabilities.
    BoostedStumps { rounds: usize, rate: f64 },
    /// k-nearest neighbors on Euclidean distance.
    Knn { neighbors: usize },
}

impl NuisanceLearnerSpec {
    pub fn lasso_default() -> Self {
        NuisanceLearnerSpec::LassoLinear {
            lambda: LambdaChoice::default(),
        }
    }

    pub fn logistic_default() -> Self {
        NuisanceLearnerSpec::LogisticLasso {
            lambda: LambdaChoice::default(),
        }
    }

    pub fn boosted_stumps(rounds: usize, rate: f64) -> Result<Self, Error> {
        if rate <= 0.0 || !rate.is_finite() {
            return Err(Error::invalid("boosting rate must be positive"));
        }
        Ok(NuisanceLearnerSpec::BoostedStumps { rounds, rate })
    }

    pub fn knn(neighbors: usize) -> Result<Self, Error> {
        if neighbors == 0 {
            return Err(Error::invalid("knn needs at least one neighbor"));
        }
        Ok(NuisanceLearnerSpec::Knn { neighbors })
    }

    pub fn is_parametric(&self) -> bool {
        matches!(
            self,
            NuisanceLearnerSpec::LassoLinear { .. } | NuisanceLearnerSpec::LogisticLasso { .. }
        )
    }
}

/// Spec strings: `lasso`, `lasso:lambda=0.05`, `logistic`,
/// `logistic:lambda=0.02`, `stumps:rounds=200,rate=0.1`, `knn:k=25`.
impl FromStr for NuisanceLearnerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let (name, params) = match s.split_once(':') {
            Some((n, p)) => (n.trim(), Some(p)),
            None => (s.trim(), None),
        };
        let mut kv = std::collections::BTreeMap::new();
        if let Some(p) = params {
            for piece in p.split(',') {
                let (key, value) = piece.split_once('=').ok_or_else(|| {
                    Error::invalid(format!("malformed learner parameter '{piece}'"))
                })?;
                kv.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        let parse_f64 = |kv: &std::collections::BTreeMap<String, String>, key: &str| {
            kv.get(key)
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::invalid(format!("'{key}' must be a number, got '{v}'")))
                })
                .transpose()
        };
        let parse_usize = |kv: &std::collections::BTreeMap<String, String>, key: &str| {
            kv.get(key)
                .map(|v| {
                    v.parse::<usize>()
                        .map_err(|_| Error::invalid(format!("'{key}' must be a count, got '{v}'")))
                })
                .transpose()
        };
        match name.to_ascii_lowercase().as_str() {
            "lasso" => {
                let lambda = match parse_f64(&kv, "lambda")? {
                    Some(l) => LambdaChoice::Fixed(l),
                    None => LambdaChoice::default(),
                };
                Ok(NuisanceLearnerSpec::LassoLinear { lambda })
            }
            "logistic" => {
                let lambda = match parse_f64(&kv, "lambda")? {
                    Some(l) => LambdaChoice::Fixed(l),
                    None => LambdaChoice::default(),
                };
                Ok(NuisanceLearnerSpec::LogisticLasso { lambda })
            }
            "stumps" => {
                let rounds = parse_usize(&kv, "rounds")?.unwrap_or(200);
                let rate = parse_f64(&kv, "rate")?.unwrap_or(0.1);
                NuisanceLearnerSpec::boosted_stumps(rounds, rate)
            }
            "knn" => {
                let k = parse_usize(&kv, "k")?.unwrap_or(25);
                NuisanceLearnerSpec::knn(k)
            }
            other => Err(Error::invalid(format!(
                "unknown learner '{other}'; valid: lasso, logistic, stumps, knn"
            ))),
        }
    }
}

/// Regression target or probability target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Regression,
    Probability,
}

/// A fitted model exposing pointwise prediction. Implementations are
/// immutable and shareable across threads.
pub trait Predictor: Send + Sync {
    fn predict_row(&self, row: ArrayView1<'_, f64>) -> f64;
}

pub type SharedPredictor = Arc<dyn Predictor>;

struct LinearPredictor {
    coefficients: Vec<f64>,
    link: Link,
}

#[derive(Clone, Copy)]
enum Link {
    Identity,
    Logistic,
}

impl Predictor for LinearPredictor {
    fn predict_row(&self, row: ArrayView1<'_, f64>) -> f64 {
        let eta: f64 = row
            .iter()
            .zip(&self.coefficients)
            .map(|(x, c)| x * c)
            .sum();
        match self.link {
            Link::Identity => eta,
            Link::Logistic => logistic(eta),
        }
    }
}

/// Fits `spec` on the subset rows and returns a shareable predictor.
/// Probability learners emit values in (0, 1) before any downstream
/// clipping. Deterministic given `seed`.
pub fn fit_learner(
    spec: &NuisanceLearnerSpec,
    task: TaskKind,
    x: &Array2<f64>,
    targets: &[f64],
    subset: &[usize],
    seed: u64,
) -> Result<SharedPredictor, Error> {
    if subset.is_empty() {
        return Err(Error::invalid("learner subset must be non-empty"));
    }
    match (spec, task) {
        (NuisanceLearnerSpec::LassoLinear { lambda }, TaskKind::Regression) => {
            let l = lambda.resolve(CvProblem::Lasso, x, targets, subset, mix_seed(seed, &[0]))?;
            let fit = fit_lasso(x, targets, subset, l, false)?;
            if !fit.converged {
                log::warn!(
                    "lasso did not converge (lambda = {l}, kkt residual = {})",
                    fit.kkt_residual
                );
            }
            Ok(Arc::new(LinearPredictor {
                coefficients: fit.coefficients,
                link: Link::Identity,
            }))
        }
        (NuisanceLearnerSpec::LassoLinear { .. }, TaskKind::Probability) => Err(Error::invalid(
            "lasso is a regression learner; use 'logistic', 'stumps', or 'knn' for probabilities",
        )),
        (NuisanceLearnerSpec::LogisticLasso { lambda }, TaskKind::Probability) => {
            let l = lambda.resolve(CvProblem::Logistic, x, targets, subset, mix_seed(seed, &[0]))?;
            let fit = fit_logistic_lasso(x, targets, subset, l)?;
            if !fit.converged {
                log::warn!(
                    "logistic lasso did not converge (lambda = {l}, kkt residual = {})",
                    fit.kkt_residual
                );
            }
            Ok(Arc::new(LinearPredictor {
                coefficients: fit.coefficients,
                link: Link::Logistic,
            }))
        }
        (NuisanceLearnerSpec::LogisticLasso { .. }, TaskKind::Regression) => Err(Error::invalid(
            "logistic lasso is a probability learner; use 'lasso', 'stumps', or 'knn' for regression",
        )),
        (NuisanceLearnerSpec::BoostedStumps { rounds, rate }, _) => Ok(Arc::new(
            BoostedStumps::fit(x, targets, subset, *rounds, *rate, task),
        )),
        (NuisanceLearnerSpec::Knn { neighbors }, _) => {
            Ok(Arc::new(KnnPredictor::fit(x, targets, subset, *neighbors, task)))
        }
    }
}

// ---------------------------------------------------------------------------
// Gradient boosted stumps
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct Stump {
    feature: usize,
    threshold: f64,
    left: f64,
    right: f64,
}

impl Stump {
    fn eval(&self, row: ArrayView1<'_, f64>) -> f64 {
        if row[self.feature] <= self.threshold {
            self.left
        } else {
            self.right
        }
    }
}

struct BoostedStumps {
    base: f64,
    rate: f64,
    stumps: Vec<Stump>,
    task: TaskKind,
}

impl BoostedStumps {
    fn fit(
        x: &Array2<f64>,
        targets: &[f64],
        subset: &[usize],
        rounds: usize,
        rate: f64,
        task: TaskKind,
    ) -> Self {
        let n = subset.len();
        let mean = subset.iter().map(|&i| targets[i]).sum::<f64>() / n as f64;
        let base = match task {
            TaskKind::Regression => mean,
            TaskKind::Probability => {
                let p = mean.clamp(1e-6, 1.0 - 1e-6);
                (p / (1.0 - p)).ln()
            }
        };

        // pre-sort subset positions by each feature once; constant features
        // are skipped entirely
        let d = x.ncols();
        let mut sorted: Vec<Option<Vec<usize>>> = Vec::with_capacity(d);
        for j in 0..d {
            let values: Vec<f64> = subset.iter().map(|&i| x[[i, j]]).collect();
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if lo == hi {
                sorted.push(None);
                continue;
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&p1, &p2| values[p1].total_cmp(&values[p2]));
            sorted.push(Some(order));
        }
        let features: Vec<(usize, Vec<f64>, Vec<usize>)> = (0..d)
            .filter_map(|j| {
                sorted[j].as_ref().map(|order| {
                    let values: Vec<f64> = subset.iter().map(|&i| x[[i, j]]).collect();
                    (j, values, order.clone())
                })
            })
            .collect();

        let mut score = vec![base; n];
        let mut residual = vec![0.0; n];
        let mut stumps = Vec::with_capacity(rounds);
        for _ in 0..rounds {
            for (pos, &i) in subset.iter().enumerate() {
                residual[pos] = match task {
                    TaskKind::Regression => targets[i] - score[pos],
                    TaskKind::Probability => targets[i] - logistic(score[pos]),
                };
            }
            let stump = best_stump(&features, &residual).unwrap_or_else(|| {
                // no splittable feature: a flat adjustment by the residual mean
                let m = residual.iter().sum::<f64>() / n as f64;
                Stump {
                    feature: 0,
                    threshold: f64::INFINITY,
                    left: m,
                    right: m,
                }
            });
            for (pos, &i) in subset.iter().enumerate() {
                score[pos] += rate * stump.eval(x.row(i));
            }
            stumps.push(stump);
        }
        Self {
            base,
            rate,
            stumps,
            task,
        }
    }
}

/// Least-squares best split across the pre-sorted features; returns None
/// when no feature admits a split.
fn best_stump(features: &[(usize, Vec<f64>, Vec<usize>)], residual: &[f64]) -> Option<Stump> {
    let n = residual.len();
    let total: f64 = residual.iter().sum();
    let mut best: Option<(f64, Stump)> = None;
    for (feature, values, order) in features {
        let mut left_sum = 0.0;
        let mut left_count = 0usize;
        for w in 0..n - 1 {
            let pos = order[w];
            left_sum += residual[pos];
            left_count += 1;
            let here = values[pos];
            let next = values[order[w + 1]];
            if here == next {
                continue;
            }
            let right_sum = total - left_sum;
            let right_count = n - left_count;
            let gain = left_sum * left_sum / left_count as f64
                + right_sum * right_sum / right_count as f64;
            if best.as_ref().map_or(true, |(g, _)| gain > *g) {
                best = Some((
                    gain,
                    Stump {
                        feature: *feature,
                        threshold: 0.5 * (here + next),
                        left: left_sum / left_count as f64,
                        right: right_sum / right_count as f64,
                    },
                ));
            }
        }
    }
    best.map(|(_, s)| s)
}

impl Predictor for BoostedStumps {
    fn predict_row(&self, row: ArrayView1<'_, f64>) -> f64 {
        let mut score = self.base;
        for stump in &self.stumps {
            score += self.rate * stump.eval(row);
        }
        match self.task {
            TaskKind::Regression => score,
            TaskKind::Probability => logistic(score),
        }
    }
}

// ---------------------------------------------------------------------------
// k-nearest neighbors
// ---------------------------------------------------------------------------

struct KnnPredictor {
    rows: Array2<f64>,
    targets: Vec<f64>,
    neighbors: usize,
    task: TaskKind,
}

impl KnnPredictor {
    fn fit(x: &Array2<f64>, targets: &[f64], subset: &[usize], neighbors: usize, task: TaskKind) -> Self {
        let d = x.ncols();
        let mut rows = Array2::<f64>::zeros((subset.len(), d));
        let mut t = Vec::with_capacity(subset.len());
        for (pos, &i) in subset.iter().enumerate() {
            rows.row_mut(pos).assign(&x.row(i));
            t.push(targets[i]);
        }
        Self {
            rows,
            targets: t,
            neighbors: neighbors.min(subset.len()),
            task,
        }
    }
}

impl Predictor for KnnPredictor {
    fn predict_row(&self, row: ArrayView1<'_, f64>) -> f64 {
        let mut dists: Vec<(f64, usize)> = self
            .rows
            .outer_iter()
            .enumerate()
            .map(|(i, r)| {
                let d2: f64 = r.iter().zip(row.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2, i)
            })
            .collect();
        // ties broken by stored row order for determinism
        dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let k = self.neighbors;
        let sum: f64 = dists[..k].iter().map(|&(_, i)| self.targets[i]).sum();
        match self.task {
            TaskKind::Regression => sum / k as f64,
            // Laplace smoothing keeps probability output strictly inside (0, 1)
            TaskKind::Probability => (sum + 0.5) / (k as f64 + 1.0),
        }
    }
}
