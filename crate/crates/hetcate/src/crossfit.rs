//! Nested leave-two-out cross-fitting: nuisance models, estimated
//! pseudo-outcomes, and per-fold CATE models.
//!
//! For every ordered fold pair `(k, k')` the outcome models are trained on
//! labeled rows outside both folds (one model per treatment arm) and the
//! propensity model on labeled plus unlabeled rows outside both folds. The
//! resulting pseudo-outcome
//!
//! ```text
//!     phi(z) = (a - pi(x)) / (pi(x) (1 - pi(x))) * (y - mu_a(x))
//!              + mu_1(x) - mu_0(x)
//! ```
//!
//! has conditional mean equal to the CATE when the nuisances are correct.
//! Fold `k`'s CATE model is then trained on rows of the other folds, each row
//! `i` in fold `k'` carrying the pair-`(k, k')` pseudo-outcome, so both the
//! target fold and the row's own fold were held out of its nuisance fits.

use ndarray::{Array2, ArrayView1};

use crate::core_model::{FoldPlan, SemiSupervisedDataset};
use crate::error::Error;
use crate::optimizers::{
    fit_lasso, fit_learner, CvProblem, LambdaChoice, NuisanceLearnerSpec, SharedPredictor,
    TaskKind,
};
use crate::seed::mix_seed;

/// Whether unlabeled rows carry treatment indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnlabeledMode {
    /// Unlabeled rows have (x, a); the propensity model trains on labeled
    /// and unlabeled rows together.
    #[default]
    FullUnlabeled,
    /// Unlabeled rows carry covariates only; the propensity model trains on
    /// labeled rows alone and any unlabeled treatment column is ignored.
    CovariatesOnly,
}

/// Fitted outcome and propensity models for one fold pair, with the training
/// index sets kept for leakage bookkeeping.
pub struct NuisancePredictor {
    pub mu0: SharedPredictor,
    pub mu1: SharedPredictor,
    pub pi: SharedPredictor,
    pub clip_epsilon: f64,
    trained_labeled: Vec<usize>,
    trained_unlabeled: Vec<usize>,
}

impl NuisancePredictor {
    /// Propensity prediction clipped into [eps, 1 - eps]. Fitted propensities
    /// can collapse to 0 or 1 in finite samples, which would explode the
    /// pseudo-outcome; the clip bounds it by (1/eps) |y - mu| + |mu1 - mu0|.
    pub fn propensity(&self, row: ArrayView1<'_, f64>) -> f64 {
        self.pi
            .predict_row(row)
            .clamp(self.clip_epsilon, 1.0 - self.clip_epsilon)
    }

    pub fn outcome_mean(&self, row: ArrayView1<'_, f64>, arm: u8) -> f64 {
        if arm == 1 {
            self.mu1.predict_row(row)
        } else {
            self.mu0.predict_row(row)
        }
    }

    pub fn trained_labeled(&self) -> &[usize] {
        &self.trained_labeled
    }

    pub fn trained_unlabeled(&self) -> &[usize] {
        &self.trained_unlabeled
    }
}

/// The doubly robust pseudo-outcome with plugged-in nuisance values.
/// `pi_hat` must already be clipped into (0, 1).
pub fn pseudo_outcome(y: f64, a: u8, mu0_hat: f64, mu1_hat: f64, pi_hat: f64) -> f64 {
    let a_f = f64::from(a);
    let mu_a = if a == 1 { mu1_hat } else { mu0_hat };
    (a_f - pi_hat) / (pi_hat * (1.0 - pi_hat)) * (y - mu_a) + mu1_hat - mu0_hat
}

/// Fits the nuisance models for the ordered fold pair `(k, k_prime)`.
///
/// Outcome models train on labeled leave-two-out rows of each arm; the
/// propensity model trains on labeled + unlabeled leave-two-out rows in
/// [`UnlabeledMode::FullUnlabeled`], or on the labeled rows alone in
/// [`UnlabeledMode::CovariatesOnly`].
#[allow(clippy::too_many_arguments)]
pub fn fit_nuisances(
    ds: &SemiSupervisedDataset,
    plan: &FoldPlan,
    k: usize,
    k_prime: usize,
    mu_spec: &NuisanceLearnerSpec,
    pi_spec: &NuisanceLearnerSpec,
    mode: UnlabeledMode,
    clip_epsilon: f64,
    seed: u64,
) -> Result<NuisancePredictor, Error> {
    if k == k_prime {
        return Err(Error::invalid("fold pair must be distinct"));
    }
    if !(clip_epsilon > 0.0 && clip_epsilon < 0.5) {
        return Err(Error::invalid("clip epsilon must lie in (0, 0.5)"));
    }
    let labeled_train = plan.labeled_leave_two_out(k, k_prime);
    let unlabeled_train = plan.unlabeled_leave_two_out(k, k_prime);

    let a = ds.labeled_a();
    let y = ds.labeled_y();
    let mut mu_models: Vec<SharedPredictor> = Vec::with_capacity(2);
    for arm in 0..2u8 {
        let subset: Vec<usize> = labeled_train
            .iter()
            .copied()
            .filter(|&i| a[i] == arm)
            .collect();
        if subset.is_empty() {
            return Err(Error::ArmAbsent { arm, k, k_prime });
        }
        let model = fit_learner(
            mu_spec,
            TaskKind::Regression,
            ds.labeled_x(),
            y,
            &subset,
            mix_seed(seed, &[u64::from(arm)]),
        )?;
        mu_models.push(model);
    }
    let mu1 = mu_models.pop().expect("two arm models");
    let mu0 = mu_models.pop().expect("two arm models");

    let pi = match mode {
        UnlabeledMode::FullUnlabeled if !unlabeled_train.is_empty() => {
            let unlabeled_a = ds.unlabeled_a().ok_or_else(|| {
                Error::invalid(
                    "unlabeled rows have no treatment column; use covariates-only mode",
                )
            })?;
            let d = ds.num_columns();
            let total = labeled_train.len() + unlabeled_train.len();
            let mut design = Array2::<f64>::zeros((total, d));
            let mut targets = Vec::with_capacity(total);
            for (pos, &i) in labeled_train.iter().enumerate() {
                design.row_mut(pos).assign(&ds.labeled_x().row(i));
                targets.push(f64::from(a[i]));
            }
            for (pos, &j) in unlabeled_train.iter().enumerate() {
                design
                    .row_mut(labeled_train.len() + pos)
                    .assign(&ds.unlabeled_x().row(j));
                targets.push(f64::from(unlabeled_a[j]));
            }
            let subset: Vec<usize> = (0..total).collect();
            fit_learner(
                pi_spec,
                TaskKind::Probability,
                &design,
                &targets,
                &subset,
                mix_seed(seed, &[2]),
            )?
        }
        _ => {
            let targets: Vec<f64> = a.iter().map(|&v| f64::from(v)).collect();
            fit_learner(
                pi_spec,
                TaskKind::Probability,
                ds.labeled_x(),
                &targets,
                &labeled_train,
                mix_seed(seed, &[2]),
            )?
        }
    };

    let trained_unlabeled = match mode {
        UnlabeledMode::FullUnlabeled => unlabeled_train,
        UnlabeledMode::CovariatesOnly => Vec::new(),
    };
    Ok(NuisancePredictor {
        mu0,
        mu1,
        pi,
        clip_epsilon,
        trained_labeled: labeled_train,
        trained_unlabeled,
    })
}

/// Nuisance fits for all K(K-1) ordered fold pairs. Fits for `(k, k')` and
/// `(k', k)` use different training sets and are never shared.
pub struct NuisanceSet {
    k_folds: usize,
    fits: Vec<Option<NuisancePredictor>>,
}

impl NuisanceSet {
    /// Computes all ordered-pair fits, deriving per-pair seeds from
    /// `base_seed` so the fits are reproducible and independent.
    pub fn fit_all(
        ds: &SemiSupervisedDataset,
        plan: &FoldPlan,
        mu_spec: &NuisanceLearnerSpec,
        pi_spec: &NuisanceLearnerSpec,
        mode: UnlabeledMode,
        clip_epsilon: f64,
        base_seed: u64,
    ) -> Result<Self, Error> {
        let k_folds = plan.k_folds();
        let mut fits = Vec::with_capacity(k_folds * k_folds);
        for k in 0..k_folds {
            for k_prime in 0..k_folds {
                if k == k_prime {
                    fits.push(None);
                    continue;
                }
                let seed = mix_seed(base_seed, &[1, k as u64, k_prime as u64]);
                fits.push(Some(fit_nuisances(
                    ds, plan, k, k_prime, mu_spec, pi_spec, mode, clip_epsilon, seed,
                )?));
            }
        }
        Ok(Self { k_folds, fits })
    }

    pub fn pair(&self, k: usize, k_prime: usize) -> &NuisancePredictor {
        self.fits[k * self.k_folds + k_prime]
            .as_ref()
            .expect("requested the diagonal of the fold-pair grid")
    }

    pub fn k_folds(&self) -> usize {
        self.k_folds
    }
}

/// Estimated pseudo-outcomes for every labeled row.
///
/// `averaged(i)` is the (K-1)-average over pairs holding out the row's own
/// fold; `pair_values(k, k')` are the per-pair values for rows of fold `k'`,
/// used to train fold `k`'s CATE model.
pub struct PseudoOutcomeTable {
    k_folds: usize,
    averaged: Vec<f64>,
    pair_values: Vec<Vec<f64>>,
}

impl PseudoOutcomeTable {
    pub fn averaged(&self, labeled_index: usize) -> f64 {
        self.averaged[labeled_index]
    }

    pub fn pair_values(&self, k: usize, k_prime: usize) -> &[f64] {
        &self.pair_values[k * self.k_folds + k_prime]
    }
}

/// Builds the pseudo-outcome table from the full set of nuisance fits.
pub fn build_pseudo_outcomes(
    ds: &SemiSupervisedDataset,
    plan: &FoldPlan,
    nuisances: &NuisanceSet,
) -> Result<PseudoOutcomeTable, Error> {
    let k_folds = plan.k_folds();
    let n = ds.n();
    let mut averaged = vec![0.0; n];
    let mut pair_values: Vec<Vec<f64>> = vec![Vec::new(); k_folds * k_folds];

    let phi_at = |fit: &NuisancePredictor, i: usize| -> Result<f64, Error> {
        let row = ds.labeled_x().row(i);
        let mu0 = fit.mu0.predict_row(row);
        let mu1 = fit.mu1.predict_row(row);
        let pi = fit.propensity(row);
        let value = pseudo_outcome(ds.labeled_y()[i], ds.labeled_a()[i], mu0, mu1, pi);
        if !value.is_finite() {
            return Err(Error::Solver(format!(
                "pseudo-outcome for labeled row {i} is not finite"
            )));
        }
        Ok(value)
    };

    for k in 0..k_folds {
        for k_prime in 0..k_folds {
            if k == k_prime {
                continue;
            }
            let fit = nuisances.pair(k, k_prime);
            debug_assert!(
                plan.labeled_fold(k)
                    .iter()
                    .chain(plan.labeled_fold(k_prime))
                    .all(|i| fit.trained_labeled().binary_search(i).is_err()),
                "nuisance fit ({k}, {k_prime}) saw rows of a held-out fold"
            );
            // own-fold evaluations feed the (K-1)-average
            for &i in plan.labeled_fold(k) {
                averaged[i] += phi_at(fit, i)?;
            }
            // other-fold evaluations feed fold k's CATE training set
            let mut values = Vec::with_capacity(plan.labeled_fold(k_prime).len());
            for &i in plan.labeled_fold(k_prime) {
                values.push(phi_at(fit, i)?);
            }
            pair_values[k * k_folds + k_prime] = values;
        }
    }
    let denom = (k_folds - 1) as f64;
    for v in &mut averaged {
        *v /= denom;
    }
    Ok(PseudoOutcomeTable {
        k_folds,
        averaged,
        pair_values,
    })
}

/// Functional form of the per-fold CATE model.
#[derive(Debug, Clone)]
pub enum CateForm {
    /// L1-penalized linear slope on the `W` columns (the ETH working model).
    LinearOnW { lambda: LambdaChoice },
    /// Arbitrary regression of pseudo-outcomes on the full `X` (TTH path).
    Generic { spec: NuisanceLearnerSpec },
}

/// A fitted per-fold CATE model.
pub enum CatePredictor {
    LinearOnW {
        beta: Vec<f64>,
        w_columns: Vec<usize>,
    },
    Generic {
        model: SharedPredictor,
    },
}

impl CatePredictor {
    /// CATE prediction for one full design row.
    pub fn predict(&self, x_row: ArrayView1<'_, f64>) -> f64 {
        match self {
            CatePredictor::LinearOnW { beta, w_columns } => w_columns
                .iter()
                .zip(beta)
                .map(|(&c, b)| x_row[c] * b)
                .sum(),
            CatePredictor::Generic { model } => model.predict_row(x_row),
        }
    }

    /// The fitted slope for linear models, on the `W` coordinate layout.
    pub fn linear_slope(&self) -> Option<&[f64]> {
        match self {
            CatePredictor::LinearOnW { beta, .. } => Some(beta),
            CatePredictor::Generic { .. } => None,
        }
    }
}

/// Fits fold `k`'s CATE model on the rows of all other folds. Row `i` in
/// fold `k'` carries the pair-`(k, k')` pseudo-outcome, so the model never
/// sees rows of fold `k` and never sees a pseudo-outcome built from the
/// row's own fold.
pub fn fit_cate(
    ds: &SemiSupervisedDataset,
    plan: &FoldPlan,
    table: &PseudoOutcomeTable,
    k: usize,
    form: &CateForm,
    seed: u64,
) -> Result<CatePredictor, Error> {
    let k_folds = plan.k_folds();
    let mut rows: Vec<usize> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    for k_prime in 0..k_folds {
        if k_prime == k {
            continue;
        }
        rows.extend_from_slice(plan.labeled_fold(k_prime));
        targets.extend_from_slice(table.pair_values(k, k_prime));
    }

    match form {
        CateForm::LinearOnW { lambda } => {
            let w_columns = ds.w_columns().to_vec();
            let p = w_columns.len();
            let mut design = Array2::<f64>::zeros((rows.len(), p));
            for (pos, &i) in rows.iter().enumerate() {
                for (c, &col) in w_columns.iter().enumerate() {
                    design[[pos, c]] = ds.labeled_x()[[i, col]];
                }
            }
            let subset: Vec<usize> = (0..rows.len()).collect();
            let l = lambda.resolve(CvProblem::Lasso, &design, &targets, &subset, seed)?;
            let fit = fit_lasso(&design, &targets, &subset, l, false)?;
            if !fit.converged {
                log::warn!(
                    "CATE slope fit for fold {k} did not converge (lambda = {l}, kkt = {})",
                    fit.kkt_residual
                );
            }
            Ok(CatePredictor::LinearOnW {
                beta: fit.coefficients,
                w_columns,
            })
        }
        CateForm::Generic { spec } => {
            let d = ds.num_columns();
            let mut design = Array2::<f64>::zeros((rows.len(), d));
            for (pos, &i) in rows.iter().enumerate() {
                design.row_mut(pos).assign(&ds.labeled_x().row(i));
            }
            let subset: Vec<usize> = (0..rows.len()).collect();
            let model = fit_learner(spec, TaskKind::Regression, &design, &targets, &subset, seed)?;
            Ok(CatePredictor::Generic { model })
        }
    }
}
