//! The four heterogeneity estimators and their inference.
//!
//! Every estimator follows the same skeleton: validate, build the fold plan,
//! fit nuisances for all ordered fold pairs, assemble pseudo-outcomes, fit a
//! per-fold CATE model, estimate the ATE for centering, then combine a
//! plug-in variance component over all N rows with a labeled-only debiasing
//! term. They differ in the CATE form (generic regression on X for TTH, an
//! L1 linear slope on W for ETH) and in how the plug-in component weighs
//! labeled against unlabeled rows.

mod moments;

pub use moments::{compute_moments, optimal_weights, ow_variance, MomentTriple};

pub use crate::crossfit::UnlabeledMode;

use crate::core_model::{
    Estimand, EstimateReport, FoldDiagnostics, FoldPlan, SemiSupervisedDataset, WeightPair,
};
use crate::crossfit::{
    build_pseudo_outcomes, fit_cate, CateForm, CatePredictor, NuisanceSet, PseudoOutcomeTable,
};
use crate::error::Error;
use crate::optimizers::{LambdaChoice, NuisanceLearnerSpec};
use crate::seed::mix_seed;
use crate::stats::population_variance;

/// Everything an estimator run needs besides the data.
#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    pub estimand: Estimand,
    pub k_folds: usize,
    pub seed: u64,
    /// Fitted propensities are clipped into [eps, 1 - eps].
    pub clip_epsilon: f64,
    pub ci_level: f64,
    pub mode: UnlabeledMode,
    pub mu_learner: NuisanceLearnerSpec,
    pub pi_learner: NuisanceLearnerSpec,
    /// CATE regression for the TTH path; `None` means boosted stumps.
    pub cate_learner: Option<NuisanceLearnerSpec>,
    /// Penalty policy for the ETH linear slope.
    pub lambda_beta: LambdaChoice,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            estimand: Estimand::Tth,
            k_folds: 3,
            seed: 0,
            clip_epsilon: 0.01,
            ci_level: 0.95,
            mode: UnlabeledMode::FullUnlabeled,
            mu_learner: NuisanceLearnerSpec::lasso_default(),
            pi_learner: NuisanceLearnerSpec::logistic_default(),
            cate_learner: None,
            lambda_beta: LambdaChoice::default(),
        }
    }
}

impl EstimatorConfig {
    pub fn new(estimand: Estimand) -> Self {
        Self {
            estimand,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<(), Error> {
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 0.5) {
            return Err(Error::invalid("clip epsilon must lie in (0, 0.5)"));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::invalid("ci level must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Dispatches on `cfg.estimand`.
pub fn estimate(
    ds: &SemiSupervisedDataset,
    cfg: &EstimatorConfig,
) -> Result<EstimateReport, Error> {
    match cfg.estimand {
        Estimand::Tth => estimate_tth(ds, cfg),
        Estimand::EthDirect => estimate_eth_direct(ds, cfg),
        Estimand::EthOw => estimate_eth_ow(ds, cfg),
        Estimand::EthSpow => estimate_eth_spow(ds, cfg),
    }
}

/// Semi-supervised ATE: the plug-in mean of the fold CATE over all N rows
/// plus the labeled-only average of pseudo-outcome residuals.
pub fn estimate_ate(
    ds: &SemiSupervisedDataset,
    plan: &FoldPlan,
    table: &PseudoOutcomeTable,
    cates: &[CatePredictor],
) -> f64 {
    let mut plug = 0.0;
    let mut debias = 0.0;
    for k in 0..plan.k_folds() {
        for &i in plan.labeled_fold(k) {
            let t = cates[k].predict(ds.labeled_x().row(i));
            plug += t;
            debias += table.averaged(i) - t;
        }
        for &j in plan.unlabeled_fold(k) {
            plug += cates[k].predict(ds.unlabeled_x().row(j));
        }
    }
    plug / ds.total() as f64 + debias / ds.n() as f64
}

/// Per-fold centered CATE values and debias residuals for the TTH path.
pub struct TthComponents {
    pub per_fold: Vec<TthFold>,
    pub tau_hat: f64,
}

pub struct TthFold {
    /// Centered CATE values on the labeled fold rows.
    pub h_labeled: Vec<f64>,
    /// Centered CATE values on the unlabeled fold rows.
    pub h_unlabeled: Vec<f64>,
    /// Debias residuals `phi - tau - h` on the labeled fold rows.
    pub xi_labeled: Vec<f64>,
}

/// Plug-in for the TTH asymptotic variance: per fold, the variance (1/n
/// form) of the debias summand over the labeled fold plus n/N times the
/// variance of the squared centered CATE over the whole fold, averaged over
/// folds.
pub fn tth_variance(components: &TthComponents, n: usize, m: usize) -> f64 {
    let frac = n as f64 / (n + m) as f64;
    let mut total = 0.0;
    for fold in &components.per_fold {
        let debias: Vec<f64> = fold
            .xi_labeled
            .iter()
            .zip(&fold.h_labeled)
            .map(|(xi, h)| 2.0 * xi * h)
            .collect();
        let h_sq: Vec<f64> = fold
            .h_labeled
            .iter()
            .chain(&fold.h_unlabeled)
            .map(|h| h * h)
            .collect();
        total += population_variance(&debias) + frac * population_variance(&h_sq);
    }
    total / components.per_fold.len() as f64
}

struct Prepared {
    plan: FoldPlan,
    table: PseudoOutcomeTable,
    cates: Vec<CatePredictor>,
}

fn prepare(
    ds: &SemiSupervisedDataset,
    cfg: &EstimatorConfig,
    cate_form: &CateForm,
) -> Result<Prepared, Error> {
    cfg.check()?;
    let report = ds.validate();
    if !report.ok() {
        return Err(Error::InvalidDataset(report));
    }
    let plan = FoldPlan::new(ds.n(), ds.m(), cfg.k_folds, cfg.seed)?;
    let nuisances = NuisanceSet::fit_all(
        ds,
        &plan,
        &cfg.mu_learner,
        &cfg.pi_learner,
        cfg.mode,
        cfg.clip_epsilon,
        cfg.seed,
    )?;
    let table = build_pseudo_outcomes(ds, &plan, &nuisances)?;
    let mut cates = Vec::with_capacity(cfg.k_folds);
    for k in 0..cfg.k_folds {
        cates.push(fit_cate(
            ds,
            &plan,
            &table,
            k,
            cate_form,
            mix_seed(cfg.seed, &[2, k as u64]),
        )?);
    }
    Ok(Prepared { plan, table, cates })
}

/// Projections `D_i . beta` of the linear working model, where
/// `D_i = W_i - mean_{G_k} W`. Centering the W columns (rather than the
/// predictions) keeps the intercept coordinate of `D` identically zero, so
/// an intercept-only slope projects to exactly zero.
fn eth_projections(
    ds: &SemiSupervisedDataset,
    plan: &FoldPlan,
    beta: &[f64],
    w_columns: &[usize],
    k: usize,
) -> (Vec<f64>, Vec<f64>) {
    let count = (plan.labeled_fold(k).len() + plan.unlabeled_fold(k).len()) as f64;
    let mut w_mean = vec![0.0; w_columns.len()];
    for &i in plan.labeled_fold(k) {
        for (c, &col) in w_columns.iter().enumerate() {
            w_mean[c] += ds.labeled_x()[[i, col]];
        }
    }
    for &j in plan.unlabeled_fold(k) {
        for (c, &col) in w_columns.iter().enumerate() {
            w_mean[c] += ds.unlabeled_x()[[j, col]];
        }
    }
    for v in &mut w_mean {
        *v /= count;
    }
    let project = |x: &ndarray::Array2<f64>, i: usize| -> f64 {
        w_columns
            .iter()
            .enumerate()
            .map(|(c, &col)| beta[c] * (x[[i, col]] - w_mean[c]))
            .sum()
    };
    (
        plan.labeled_fold(k)
            .iter()
            .map(|&i| project(ds.labeled_x(), i))
            .collect(),
        plan.unlabeled_fold(k)
            .iter()
            .map(|&j| project(ds.unlabeled_x(), j))
            .collect(),
    )
}

/// Centered fold predictions: the prediction on every row of the fold,
/// centered by the mean over the fold's labeled + unlabeled rows.
fn centered_fold_predictions(
    ds: &SemiSupervisedDataset,
    plan: &FoldPlan,
    cate: &CatePredictor,
    k: usize,
) -> (Vec<f64>, Vec<f64>) {
    let labeled: Vec<f64> = plan
        .labeled_fold(k)
        .iter()
        .map(|&i| cate.predict(ds.labeled_x().row(i)))
        .collect();
    let unlabeled: Vec<f64> = plan
        .unlabeled_fold(k)
        .iter()
        .map(|&j| cate.predict(ds.unlabeled_x().row(j)))
        .collect();
    let count = (labeled.len() + unlabeled.len()) as f64;
    let mean = (labeled.iter().sum::<f64>() + unlabeled.iter().sum::<f64>()) / count;
    (
        labeled.iter().map(|t| t - mean).collect(),
        unlabeled.iter().map(|t| t - mean).collect(),
    )
}

/// Semi-supervised estimator of the total treatment heterogeneity
/// Var[tau(X)].
pub fn estimate_tth(
    ds: &SemiSupervisedDataset,
    cfg: &EstimatorConfig,
) -> Result<EstimateReport, Error> {
    let cate_spec = cfg
        .cate_learner
        .clone()
        .unwrap_or(NuisanceLearnerSpec::BoostedStumps {
            rounds: 200,
            rate: 0.1,
        });
    let form = CateForm::Generic { spec: cate_spec };
    let prep = prepare(ds, cfg, &form)?;
    let n = ds.n();
    let m = ds.m();
    let total = ds.total() as f64;

    let tau_hat = estimate_ate(ds, &prep.plan, &prep.table, &prep.cates);

    let mut per_fold = Vec::with_capacity(cfg.k_folds);
    let mut plug = 0.0;
    let mut debias = 0.0;
    for k in 0..cfg.k_folds {
        let (h_labeled, h_unlabeled) =
            centered_fold_predictions(ds, &prep.plan, &prep.cates[k], k);
        debug_assert!(
            (h_labeled.iter().sum::<f64>() + h_unlabeled.iter().sum::<f64>()).abs()
                <= 1e-10 * (1.0 + h_labeled.len() as f64),
            "centered CATE values do not sum to zero on fold {k}"
        );
        let mut xi_labeled = Vec::with_capacity(h_labeled.len());
        for (pos, &i) in prep.plan.labeled_fold(k).iter().enumerate() {
            let h = h_labeled[pos];
            let xi = prep.table.averaged(i) - tau_hat - h;
            plug += h * h;
            debias += h * xi;
            xi_labeled.push(xi);
        }
        for h in &h_unlabeled {
            plug += h * h;
        }
        per_fold.push(TthFold {
            h_labeled,
            h_unlabeled,
            xi_labeled,
        });
    }
    let point = plug / total + 2.0 * debias / n as f64;
    let components = TthComponents { per_fold, tau_hat };
    let sigma_sq = tth_variance(&components, n, m);
    let std_error = (sigma_sq.max(0.0) / n as f64).sqrt();
    Ok(EstimateReport::from_point(
        Estimand::Tth,
        point,
        std_error,
        cfg.ci_level,
        tau_hat,
        n,
        m,
        cfg.k_folds,
        cfg.seed,
        Vec::new(),
    ))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Weighting {
    Equal,
    Optimal,
}

fn require_parametric(cfg: &EstimatorConfig, name: &str) -> Result<(), Error> {
    let mu_ok = matches!(cfg.mu_learner, NuisanceLearnerSpec::LassoLinear { .. });
    let pi_ok = matches!(cfg.pi_learner, NuisanceLearnerSpec::LogisticLasso { .. });
    if mu_ok && pi_ok {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{name} requires lasso outcome and logistic-lasso propensity models; \
             use eth-spow for other learners"
        )))
    }
}

fn run_eth(
    ds: &SemiSupervisedDataset,
    cfg: &EstimatorConfig,
    estimand: Estimand,
    weighting: Weighting,
) -> Result<EstimateReport, Error> {
    let form = CateForm::LinearOnW {
        lambda: cfg.lambda_beta.clone(),
    };
    let prep = prepare(ds, cfg, &form)?;
    let n = ds.n();
    let m = ds.m();

    let tau_hat = estimate_ate(ds, &prep.plan, &prep.table, &prep.cates);

    let mut plug = 0.0;
    let mut debias = 0.0;
    let mut sigma_sq = 0.0;
    let mut diagnostics = Vec::with_capacity(cfg.k_folds);
    for k in 0..cfg.k_folds {
        let beta = prep.cates[k]
            .linear_slope()
            .expect("the ETH working model is linear");
        let (proj_labeled, proj_unlabeled) =
            eth_projections(ds, &prep.plan, beta, ds.w_columns(), k);
        let mut eps = Vec::with_capacity(proj_labeled.len());
        for (pos, &i) in prep.plan.labeled_fold(k).iter().enumerate() {
            eps.push(prep.table.averaged(i) - tau_hat - proj_labeled[pos]);
        }
        let proj_all: Vec<f64> = proj_labeled
            .iter()
            .chain(&proj_unlabeled)
            .copied()
            .collect();
        let triple = compute_moments(k, &eps, &proj_labeled, &proj_all);

        let weights = match weighting {
            Weighting::Equal => WeightPair::equal(n, m),
            Weighting::Optimal => triple.weights(n, m),
        };
        let labeled_sq: f64 = proj_labeled.iter().map(|v| v * v).sum();
        let unlabeled_sq: f64 = proj_unlabeled.iter().map(|v| v * v).sum();
        plug += weights.omega_l * labeled_sq + weights.omega_u * unlabeled_sq;
        debias += proj_labeled.iter().zip(&eps).map(|(v, e)| v * e).sum::<f64>();
        sigma_sq += match weighting {
            Weighting::Equal => triple.fold_variance_direct(n, m),
            Weighting::Optimal => triple.fold_variance_ow(n, m),
        };
        diagnostics.push(FoldDiagnostics {
            fold: k,
            a_hat: triple.a_hat,
            b_hat: triple.b_hat,
            c_hat: triple.c_hat,
            omega_l: weights.omega_l,
            omega_u: weights.omega_u,
        });
    }
    let point = plug + 2.0 * debias / n as f64;
    sigma_sq /= cfg.k_folds as f64;
    let std_error = (sigma_sq.max(0.0) / n as f64).sqrt();
    Ok(EstimateReport::from_point(
        estimand,
        point,
        std_error,
        cfg.ci_level,
        tau_hat,
        n,
        m,
        cfg.k_folds,
        cfg.seed,
        diagnostics,
    ))
}

/// Direct (equal-weight) semi-supervised estimator of the explained
/// treatment heterogeneity Var[tau*(W)] with parametric nuisances.
pub fn estimate_eth_direct(
    ds: &SemiSupervisedDataset,
    cfg: &EstimatorConfig,
) -> Result<EstimateReport, Error> {
    require_parametric(cfg, "the direct ETH estimator")?;
    run_eth(ds, cfg, Estimand::EthDirect, Weighting::Equal)
}

/// Optimally weighted semi-supervised ETH estimator with parametric
/// nuisances.
pub fn estimate_eth_ow(
    ds: &SemiSupervisedDataset,
    cfg: &EstimatorConfig,
) -> Result<EstimateReport, Error> {
    require_parametric(cfg, "the optimally weighted ETH estimator")?;
    run_eth(ds, cfg, Estimand::EthOw, Weighting::Optimal)
}

/// Semi-parametric optimally weighted ETH estimator: identical algebra to
/// [`estimate_eth_ow`] with nuisances from any configured learner. With
/// lasso/logistic specs it reproduces the parametric estimator exactly.
pub fn estimate_eth_spow(
    ds: &SemiSupervisedDataset,
    cfg: &EstimatorConfig,
) -> Result<EstimateReport, Error> {
    run_eth(ds, cfg, Estimand::EthSpow, Weighting::Optimal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    use crate::stats::logistic;

    fn linear_dataset(n: usize, m: usize, seed: u64) -> SemiSupervisedDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 5;
        let mut block = |count: usize, with_y: bool| {
            let mut x = Array2::<f64>::zeros((count, d));
            let mut a = Vec::with_capacity(count);
            let mut y = Vec::with_capacity(count);
            for i in 0..count {
                x[[i, 0]] = 1.0;
                for j in 1..d {
                    x[[i, j]] = rng.sample::<f64, _>(StandardNormal);
                }
                let pi = logistic(0.3 * x[[i, 1]]);
                let ai = u8::from(rng.random::<f64>() < pi);
                a.push(ai);
                if with_y {
                    y.push(
                        0.5 * x[[i, 2]]
                            + f64::from(ai) * (x[[i, 1]] + x[[i, 2]])
                            + 0.1 * rng.sample::<f64, _>(StandardNormal),
                    );
                }
            }
            (x, a, y)
        };
        let (lx, la, ly) = block(n, true);
        let (ux, ua, _) = block(m, false);
        SemiSupervisedDataset::new(lx, la, ly, ux, Some(ua), (0..d).collect()).unwrap()
    }

    fn fixed_lambda_config(estimand: Estimand, seed: u64) -> EstimatorConfig {
        EstimatorConfig {
            estimand,
            seed,
            mu_learner: NuisanceLearnerSpec::LassoLinear {
                lambda: LambdaChoice::Fixed(0.05),
            },
            pi_learner: NuisanceLearnerSpec::LogisticLasso {
                lambda: LambdaChoice::Fixed(0.05),
            },
            cate_learner: Some(NuisanceLearnerSpec::LassoLinear {
                lambda: LambdaChoice::Fixed(0.05),
            }),
            lambda_beta: LambdaChoice::Fixed(0.05),
            ..EstimatorConfig::default()
        }
    }

    #[test]
    fn invalid_dataset_is_refused() {
        let x = ndarray::array![[1.0, 0.5], [1.0, -0.3], [1.0, 0.4]];
        let ds = SemiSupervisedDataset::supervised(x, vec![1, 1, 1], vec![0.1, 0.2, 0.3]).unwrap();
        let cfg = EstimatorConfig::default();
        let err = estimate_tth(&ds, &cfg).unwrap_err();
        assert!(err.to_string().contains("arm 0 absent"));
    }

    #[test]
    fn huge_beta_penalty_zeroes_the_direct_estimate() {
        let ds = linear_dataset(60, 30, 1);
        let mut cfg = fixed_lambda_config(Estimand::EthDirect, 4);
        cfg.lambda_beta = LambdaChoice::Fixed(1e6);
        let report = estimate_eth_direct(&ds, &cfg).unwrap();
        // slope is intercept-only, so every projection D.beta is exactly zero
        assert_eq!(report.point, 0.0);
    }

    #[test]
    fn ow_equals_direct_when_covariances_vanish() {
        // force c_hat = 0 by reconstructing the weights: with equal weights
        // the two estimators share every other term, so we verify via the
        // triple: when the computed c_hat is exactly zero the weights match
        // 1/N. This is exercised end-to-end in the acceptance suite; here we
        // check the weight algebra branch on real diagnostics.
        let ds = linear_dataset(60, 30, 2);
        let cfg = fixed_lambda_config(Estimand::EthOw, 5);
        let report = estimate_eth_ow(&ds, &cfg).unwrap();
        for diag in &report.diagnostics {
            let w = optimal_weights(diag.b_hat, 0.0, 60, 30);
            assert_abs_diff_eq!(w.omega_l, 1.0 / 90.0, epsilon = 1e-12);
            assert_abs_diff_eq!(w.omega_u, 1.0 / 90.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn spow_with_parametric_specs_matches_ow_numerically() {
        let ds = linear_dataset(90, 45, 3);
        let cfg = fixed_lambda_config(Estimand::EthOw, 11);
        let ow = estimate_eth_ow(&ds, &cfg).unwrap();
        let mut cfg_sp = cfg.clone();
        cfg_sp.estimand = Estimand::EthSpow;
        let spow = estimate_eth_spow(&ds, &cfg_sp).unwrap();
        assert_eq!(ow.point, spow.point);
        assert_eq!(ow.std_error, spow.std_error);
        assert_eq!(ow.ate_hat, spow.ate_hat);
    }

    #[test]
    fn ow_requires_parametric_specs() {
        let ds = linear_dataset(60, 0, 9);
        let mut cfg = fixed_lambda_config(Estimand::EthOw, 2);
        cfg.mu_learner = NuisanceLearnerSpec::boosted_stumps(10, 0.1).unwrap();
        assert!(estimate_eth_ow(&ds, &cfg).is_err());
        cfg.pi_learner = NuisanceLearnerSpec::boosted_stumps(10, 0.1).unwrap();
        assert!(estimate_eth_spow(&ds, &cfg).is_ok());
    }

    #[test]
    fn scale_equivariance_with_fixed_lambdas() {
        let ds = linear_dataset(90, 45, 7);
        let c = 3.0;
        let scaled = SemiSupervisedDataset::new(
            ds.labeled_x().clone(),
            ds.labeled_a().to_vec(),
            ds.labeled_y().iter().map(|y| c * y).collect(),
            ds.unlabeled_x().clone(),
            ds.unlabeled_a().map(|a| a.to_vec()),
            ds.w_columns().to_vec(),
        )
        .unwrap();
        for estimand in [Estimand::Tth, Estimand::EthDirect, Estimand::EthOw] {
            let cfg = fixed_lambda_config(estimand, 13);
            let mut cfg_scaled = cfg.clone();
            // the outcome-model and CATE penalties live on the y scale
            cfg_scaled.mu_learner = NuisanceLearnerSpec::LassoLinear {
                lambda: LambdaChoice::Fixed(0.05 * c),
            };
            cfg_scaled.cate_learner = Some(NuisanceLearnerSpec::LassoLinear {
                lambda: LambdaChoice::Fixed(0.05 * c),
            });
            cfg_scaled.lambda_beta = LambdaChoice::Fixed(0.05 * c);
            let base = estimate(&ds, &cfg).unwrap();
            let scaled_report = estimate(&scaled, &cfg_scaled).unwrap();
            assert_abs_diff_eq!(
                scaled_report.point,
                c * c * base.point,
                epsilon = 1e-8 * (1.0 + base.point.abs() * c * c)
            );
            assert_abs_diff_eq!(
                scaled_report.ate_hat,
                c * base.ate_hat,
                epsilon = 1e-8 * (1.0 + base.ate_hat.abs() * c)
            );
        }
    }

    #[test]
    fn ate_reduces_to_simple_means_in_degenerate_cases() {
        let ds = linear_dataset(45, 21, 5);
        let plan = FoldPlan::new(45, 21, 3, 8).unwrap();
        let nuisances = NuisanceSet::fit_all(
            &ds,
            &plan,
            &NuisanceLearnerSpec::LassoLinear {
                lambda: LambdaChoice::Fixed(0.05),
            },
            &NuisanceLearnerSpec::LogisticLasso {
                lambda: LambdaChoice::Fixed(0.05),
            },
            UnlabeledMode::FullUnlabeled,
            0.01,
            0,
        )
        .unwrap();
        let table = build_pseudo_outcomes(&ds, &plan, &nuisances).unwrap();
        // zero CATE predictors: tau_hat = mean of averaged pseudo-outcomes
        let zeros: Vec<CatePredictor> = (0..3)
            .map(|_| CatePredictor::LinearOnW {
                beta: vec![0.0; 5],
                w_columns: (0..5).collect(),
            })
            .collect();
        let tau = estimate_ate(&ds, &plan, &table, &zeros);
        let phi_mean: f64 = (0..45).map(|i| table.averaged(i)).sum::<f64>() / 45.0;
        assert_abs_diff_eq!(tau, phi_mean, epsilon = 1e-12);
        // constant CATE predictors: plug-in contributes the constant, and
        // the debias term subtracts it from the labeled mean
        let consts: Vec<CatePredictor> = (0..3)
            .map(|_| {
                let mut beta = vec![0.0; 5];
                beta[0] = 2.0;
                CatePredictor::LinearOnW {
                    beta,
                    w_columns: (0..5).collect(),
                }
            })
            .collect();
        let tau_c = estimate_ate(&ds, &plan, &table, &consts);
        assert_abs_diff_eq!(tau_c, 2.0 + (phi_mean - 2.0), epsilon = 1e-12);
    }

    #[test]
    fn tth_variance_m_zero_is_the_labeled_only_form() {
        let components = TthComponents {
            per_fold: vec![TthFold {
                h_labeled: vec![1.0, -1.0, 0.5],
                h_unlabeled: vec![],
                xi_labeled: vec![0.2, -0.1, 0.3],
            }],
            tau_hat: 0.0,
        };
        let v = tth_variance(&components, 3, 0);
        let debias = [2.0 * 0.2 * 1.0, 2.0 * (-0.1) * (-1.0), 2.0 * 0.3 * 0.5];
        let h_sq = [1.0, 1.0, 0.25];
        assert_abs_diff_eq!(
            v,
            population_variance(&debias) + population_variance(&h_sq),
            epsilon = 1e-12
        );
        // all-zero centered CATE gives zero variance
        let zero = TthComponents {
            per_fold: vec![TthFold {
                h_labeled: vec![0.0; 4],
                h_unlabeled: vec![0.0; 2],
                xi_labeled: vec![1.0, 2.0, 3.0, 4.0],
            }],
            tau_hat: 0.0,
        };
        assert_eq!(tth_variance(&zero, 4, 2), 0.0);
    }
}
