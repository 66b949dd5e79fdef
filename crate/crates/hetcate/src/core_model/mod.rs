//! Shared domain types: the dataset, fold layout, and estimate reports.
//!
//! No estimation logic lives here. Everything is immutable after
//! construction and safe to share across threads.

mod dataset;
mod folds;
mod report;

pub use dataset::{SemiSupervisedDataset, ValidationReport};
pub use folds::FoldPlan;
pub use report::{Estimand, EstimateReport, FoldDiagnostics, WeightPair};
