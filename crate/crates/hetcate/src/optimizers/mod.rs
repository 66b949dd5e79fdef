//! Self-contained solvers for the L1-regularized nuisance problems plus the
//! pluggable nonparametric learners.

mod cv;
mod lasso;
mod learners;
mod logistic;

pub use cv::{default_c_grid, lambda_rate, select_lambda_cv, CvProblem, DEFAULT_CV_FOLDS};
pub use lasso::{fit_lasso, lasso_path, LassoFit};
pub use learners::{fit_learner, LambdaChoice, NuisanceLearnerSpec, Predictor, SharedPredictor, TaskKind};
pub use logistic::{fit_logistic_lasso, logistic_lasso_path, LogisticLassoFit};
