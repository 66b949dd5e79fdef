//! Semi-supervised estimation of treatment heterogeneity.
//!
//! Given labeled observations `(x, a, y)` (covariates, binary treatment,
//! outcome) and a pool of unlabeled rows `(x)` or `(x, a)`, this crate
//! estimates how strongly the conditional average treatment effect (CATE)
//! varies across covariates:
//!
//! - **TTH** (total treatment heterogeneity): `Var[tau(X)]`, the variance of
//!   the CATE itself.
//! - **ETH** (explained treatment heterogeneity): `Var[tau*(W)]`, the variance
//!   captured by a linear working model on a covariate subset `W`.
//!
//! All estimators share the same nested leave-two-out cross-fitting layout:
//! doubly robust pseudo-outcomes are built from outcome and propensity
//! models trained with two folds held out, a CATE model is fit per held-out
//! fold, and a plug-in + debiasing decomposition turns the fitted CATE into
//! an asymptotically normal variance estimate. The ETH estimators come in a
//! direct (equal-weight) flavor and an optimally weighted flavor that
//! re-weights labeled vs. unlabeled rows so the semi-supervised estimator is
//! never less efficient than its supervised counterpart.
//!
//! The crate ships self-contained solvers (coordinate-descent lasso,
//! proximal-Newton logistic lasso, boosted stumps, k-NN), a simulation
//! harness for coverage/bias studies, and a thin CLI (`hetcate`) for CSV
//! workflows. See the `examples/` directory for runnable entry points.

pub mod cli;
pub mod core_model;
pub mod crossfit;
pub mod estimators;
pub mod optimizers;
pub mod simulation;

mod error;
mod seed;
mod stats;

pub use error::Error;
pub use seed::mix_seed;

pub use core_model::{
    Estimand, EstimateReport, FoldDiagnostics, FoldPlan, SemiSupervisedDataset, ValidationReport,
    WeightPair,
};
pub use estimators::{
    estimate, estimate_eth_direct, estimate_eth_ow, estimate_eth_spow, estimate_tth,
    EstimatorConfig, UnlabeledMode,
};
pub use optimizers::{LambdaChoice, NuisanceLearnerSpec};
pub use simulation::{draw_dataset, run_study, true_theta, DgpSpec, StudyCell, StudyResult};
