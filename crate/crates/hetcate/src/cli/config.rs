//! Declarative run and study configuration.
//!
//! A run config is a flat TOML document mirroring the CLI flags; flags
//! override file values, and the `HETCATE_SEED` environment variable is the
//! default-seed fallback when neither gives one.

use serde::Deserialize;

use crate::core_model::Estimand;
use crate::estimators::{EstimatorConfig, UnlabeledMode};
use crate::optimizers::{LambdaChoice, NuisanceLearnerSpec};
use crate::simulation::{DgpSpec, StudyCell};

use super::CliError;

/// Optional settings from a config file or CLI flags. `None` means "not
/// given here"; later layers win when merging.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct RunOverrides {
    pub estimand: Option<String>,
    pub k_folds: Option<usize>,
    pub seed: Option<u64>,
    pub clip_epsilon: Option<f64>,
    pub ci_level: Option<f64>,
    pub mode: Option<String>,
    pub mu_learner: Option<String>,
    pub pi_learner: Option<String>,
    pub cate_learner: Option<String>,
    pub lambda_mu: Option<f64>,
    pub lambda_pi: Option<f64>,
    pub lambda_beta: Option<f64>,
    pub w_columns: Option<Vec<usize>>,
}

impl RunOverrides {
    /// Layered merge: values in `self` win over `base`.
    pub fn merge_over(self, base: RunOverrides) -> RunOverrides {
        RunOverrides {
            estimand: self.estimand.or(base.estimand),
            k_folds: self.k_folds.or(base.k_folds),
            seed: self.seed.or(base.seed),
            clip_epsilon: self.clip_epsilon.or(base.clip_epsilon),
            ci_level: self.ci_level.or(base.ci_level),
            mode: self.mode.or(base.mode),
            mu_learner: self.mu_learner.or(base.mu_learner),
            pi_learner: self.pi_learner.or(base.pi_learner),
            cate_learner: self.cate_learner.or(base.cate_learner),
            lambda_mu: self.lambda_mu.or(base.lambda_mu),
            lambda_pi: self.lambda_pi.or(base.lambda_pi),
            lambda_beta: self.lambda_beta.or(base.lambda_beta),
            w_columns: self.w_columns.or(base.w_columns),
        }
    }

    /// Resolves into a full estimator config plus the W column selection
    /// (None keeps all columns).
    pub fn resolve(&self) -> Result<(EstimatorConfig, Option<Vec<usize>>), CliError> {
        let mut cfg = EstimatorConfig::default();
        if let Some(e) = &self.estimand {
            cfg.estimand = e
                .parse::<Estimand>()
                .map_err(|err| CliError::validation(err.to_string()))?;
        }
        if let Some(k) = self.k_folds {
            cfg.k_folds = k;
        }
        cfg.seed = match self.seed {
            Some(s) => s,
            None => match std::env::var("HETCATE_SEED") {
                Ok(raw) => raw.parse::<u64>().map_err(|_| {
                    CliError::validation(format!(
                        "HETCATE_SEED must be an unsigned integer, got '{raw}'"
                    ))
                })?,
                Err(_) => 0,
            },
        };
        if let Some(eps) = self.clip_epsilon {
            cfg.clip_epsilon = eps;
        }
        if let Some(level) = self.ci_level {
            cfg.ci_level = level;
        }
        if let Some(mode) = &self.mode {
            cfg.mode = parse_mode(mode)?;
        }
        cfg.mu_learner = match &self.mu_learner {
            Some(s) => parse_learner(s)?,
            None => NuisanceLearnerSpec::lasso_default(),
        };
        cfg.pi_learner = match &self.pi_learner {
            Some(s) => parse_learner(s)?,
            None => NuisanceLearnerSpec::logistic_default(),
        };
        cfg.cate_learner = match &self.cate_learner {
            Some(s) => Some(parse_learner(s)?),
            None => None,
        };
        if let Some(l) = self.lambda_mu {
            match &mut cfg.mu_learner {
                NuisanceLearnerSpec::LassoLinear { lambda } => *lambda = LambdaChoice::Fixed(l),
                _ => {
                    return Err(CliError::validation(
                        "lambda-mu applies to the lasso outcome learner".into(),
                    ))
                }
            }
        }
        if let Some(l) = self.lambda_pi {
            match &mut cfg.pi_learner {
                NuisanceLearnerSpec::LogisticLasso { lambda } => *lambda = LambdaChoice::Fixed(l),
                _ => {
                    return Err(CliError::validation(
                        "lambda-pi applies to the logistic-lasso propensity learner".into(),
                    ))
                }
            }
        }
        if let Some(l) = self.lambda_beta {
            cfg.lambda_beta = LambdaChoice::Fixed(l);
        }
        Ok((cfg, self.w_columns.clone()))
    }
}

fn parse_mode(raw: &str) -> Result<UnlabeledMode, CliError> {
    match raw.to_ascii_lowercase().replace('_', "-").as_str() {
        "full" | "full-unlabeled" => Ok(UnlabeledMode::FullUnlabeled),
        "covariates" | "covariates-only" => Ok(UnlabeledMode::CovariatesOnly),
        other => Err(CliError::validation(format!(
            "unknown mode '{other}'; valid: full-unlabeled, covariates-only"
        ))),
    }
}

fn parse_learner(raw: &str) -> Result<NuisanceLearnerSpec, CliError> {
    raw.parse::<NuisanceLearnerSpec>()
        .map_err(|e| CliError::validation(e.to_string()))
}

pub fn load_run_config(path: &std::path::Path) -> Result<RunOverrides, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

/// Study config: replication count, seed, worker count, shared defaults,
/// and one `[[cells]]` entry per (estimator, DGP) pair.
#[derive(Debug, Deserialize)]
pub struct StudyConfigFile {
    pub reps: usize,
    #[serde(default)]
    pub base_seed: u64,
    pub workers: Option<usize>,
    #[serde(default)]
    pub defaults: RunOverrides,
    pub cells: Vec<StudyCellConfig>,
}

#[derive(Debug, Deserialize)]
pub struct StudyCellConfig {
    pub label: Option<String>,
    pub estimand: String,
    pub model: u8,
    pub n: usize,
    pub m: usize,
    #[serde(flatten)]
    pub overrides: RunOverrides,
}

pub fn load_study_config(
    path: &std::path::Path,
) -> Result<(Vec<StudyCell>, usize, u64, usize), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    let file: StudyConfigFile = toml::from_str(&text)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    let mut cells = Vec::with_capacity(file.cells.len());
    for cell in &file.cells {
        let merged = cell.overrides.clone().merge_over(file.defaults.clone());
        let (mut config, w_columns) = merged.resolve()?;
        if w_columns.is_some() {
            return Err(CliError::validation(
                "study cells use W = X; w_columns is not configurable per cell".into(),
            ));
        }
        config.estimand = cell
            .estimand
            .parse::<Estimand>()
            .map_err(|e| CliError::validation(e.to_string()))?;
        let dgp = DgpSpec::new(cell.model, cell.n, cell.m, 0)
            .map_err(|e| CliError::validation(e.to_string()))?;
        let label = cell.label.clone().unwrap_or_else(|| {
            format!(
                "{}-m{}-{}x{}",
                config.estimand.as_str().to_ascii_lowercase(),
                cell.model,
                cell.n,
                cell.m
            )
        });
        cells.push(StudyCell {
            label,
            config,
            dgp,
        });
    }
    let workers = file.workers.unwrap_or(1);
    Ok((cells, file.reps, file.base_seed, workers))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_prefers_the_upper_layer() {
        let base = RunOverrides {
            seed: Some(1),
            k_folds: Some(5),
            ..Default::default()
        };
        let top = RunOverrides {
            seed: Some(9),
            ..Default::default()
        };
        let merged = top.merge_over(base);
        assert_eq!(merged.seed, Some(9));
        assert_eq!(merged.k_folds, Some(5));
    }

    #[test]
    fn resolve_applies_lambdas_to_matching_learners() {
        let overrides = RunOverrides {
            lambda_mu: Some(0.07),
            lambda_pi: Some(0.03),
            lambda_beta: Some(0.05),
            seed: Some(4),
            ..Default::default()
        };
        let (cfg, w) = overrides.resolve().unwrap();
        assert!(w.is_none());
        assert_eq!(
            cfg.mu_learner,
            NuisanceLearnerSpec::LassoLinear {
                lambda: LambdaChoice::Fixed(0.07)
            }
        );
        assert_eq!(
            cfg.pi_learner,
            NuisanceLearnerSpec::LogisticLasso {
                lambda: LambdaChoice::Fixed(0.03)
            }
        );
        assert_eq!(cfg.lambda_beta, LambdaChoice::Fixed(0.05));
    }

    #[test]
    fn lambda_flags_reject_mismatched_learners() {
        let overrides = RunOverrides {
            mu_learner: Some("stumps".into()),
            lambda_mu: Some(0.07),
            ..Default::default()
        };
        assert!(overrides.resolve().is_err());
    }

    #[test]
    fn study_config_parses() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("study.toml");
        std::fs::write(
            &path,
            r#"
reps = 4
base_seed = 11
workers = 2

[defaults]
k_folds = 3
lambda_mu = 0.05
lambda_pi = 0.05
lambda_beta = 0.05

[[cells]]
estimand = "tth"
model = 3
n = 60
m = 30
cate_learner = "lasso"

[[cells]]
label = "ow-cell"
estimand = "eth-ow"
model = 3
n = 60
m = 0
"#,
        )
        .unwrap();
        let (cells, reps, base_seed, workers) = load_study_config(&path).unwrap();
        assert_eq!(reps, 4);
        assert_eq!(base_seed, 11);
        assert_eq!(workers, 2);
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[0].config.estimand, Estimand::Tth);
        assert_eq!(cells[0].dgp.model_id, 3);
        assert_eq!(cells[1].label, "ow-cell");
        assert_eq!(cells[1].config.k_folds, 3);
    }
}
