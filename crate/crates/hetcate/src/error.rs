use thiserror::Error;

use crate::core_model::ValidationReport;

/// Errors surfaced by estimators, solvers, and the simulation harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidDataset(ValidationReport),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fold plan: {0}")]
    FoldPlan(String),

    #[error("treatment arm {arm} absent in training set for fold pair ({k}, {k_prime})")]
    ArmAbsent { arm: u8, k: usize, k_prime: usize },

    #[error("propensity fit requires both arms")]
    SingleClass,

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("study cell '{label}' failed: {failures}/{reps} replications errored")]
    StudyCellFailed {
        label: String,
        failures: usize,
        reps: usize,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
