//! Replication driver and metric aggregation for coverage/bias studies.
//!
//! Replication `r` of cell `c` draws its dataset with seed
//! `mix_seed(base_seed, [c, r, 0])` and runs the estimator with seed
//! `mix_seed(base_seed, [c, r, 1])`, so results are identical for any
//! degree of parallelism and reproducible across machines.

use rayon::prelude::*;

use crate::core_model::{Estimand, EstimateReport, SemiSupervisedDataset};
use crate::error::Error;
use crate::estimators::{estimate, EstimatorConfig};
use crate::seed::mix_seed;
use crate::stats::{mean, sample_variance};

use super::{draw_dataset, true_theta, DgpSpec, TrueEstimand};

/// One study cell: an estimator configuration applied to one DGP setting.
/// The `dgp.seed` field is ignored; per-replication seeds are derived.
#[derive(Debug, Clone)]
pub struct StudyCell {
    pub label: String,
    pub config: EstimatorConfig,
    pub dgp: DgpSpec,
}

impl StudyCell {
    fn true_value(&self) -> f64 {
        let estimand = match self.config.estimand {
            Estimand::Tth => TrueEstimand::Tth,
            _ => TrueEstimand::EthLinearAllX,
        };
        true_theta(self.dgp.model_id, estimand)
    }
}

/// Aggregated metrics for one cell, laid out like the usual simulation
/// tables: bias, empirical SE, average estimated SE, RMSE, coverage of the
/// nominal CI, and mean CI length.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub label: String,
    pub estimand: Estimand,
    pub n: usize,
    pub m: usize,
    pub bias: f64,
    pub emp_se: f64,
    pub ase: f64,
    pub rmse: f64,
    pub coverage: f64,
    pub ci_length: f64,
    pub n_reps: usize,
    pub true_theta: f64,
    pub failures: usize,
}

struct RepOutcome {
    point: f64,
    std_error: f64,
    covered: bool,
    ci_length: f64,
}

/// Runs every (cell, replication) pair with the library estimators.
pub fn run_study(
    cells: &[StudyCell],
    n_reps: usize,
    base_seed: u64,
    workers: usize,
) -> Result<Vec<StudyResult>, Error> {
    run_study_with(cells, n_reps, base_seed, workers, estimate)
}

/// Same as [`run_study`] with an injectable estimator, which keeps the
/// aggregation testable against stubs.
pub fn run_study_with<F>(
    cells: &[StudyCell],
    n_reps: usize,
    base_seed: u64,
    workers: usize,
    estimator: F,
) -> Result<Vec<StudyResult>, Error>
where
    F: Fn(&SemiSupervisedDataset, &EstimatorConfig) -> Result<EstimateReport, Error> + Sync,
{
    if n_reps < 2 {
        return Err(Error::invalid("a study needs at least 2 replications"));
    }
    if workers == 0 {
        return Err(Error::invalid("worker count must be positive"));
    }

    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..n_reps).map(move |r| (c, r)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("could not build worker pool: {e}")))?;

    let outcomes: Vec<Result<RepOutcome, Error>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, r)| run_replication(&cells[c], c, r, base_seed, &estimator))
            .collect()
    });

    let mut results = Vec::with_capacity(cells.len());
    for (c, cell) in cells.iter().enumerate() {
        let cell_outcomes = &outcomes[c * n_reps..(c + 1) * n_reps];
        let mut points = Vec::with_capacity(n_reps);
        let mut ses = Vec::with_capacity(n_reps);
        let mut lengths = Vec::with_capacity(n_reps);
        let mut covered = 0usize;
        let mut failures = 0usize;
        for outcome in cell_outcomes {
            match outcome {
                Ok(rep) => {
                    points.push(rep.point);
                    ses.push(rep.std_error);
                    lengths.push(rep.ci_length);
                    covered += usize::from(rep.covered);
                }
                Err(e) => {
                    log::warn!("replication failed in cell '{}': {e}", cell.label);
                    failures += 1;
                }
            }
        }
        if failures * 20 > n_reps {
            return Err(Error::StudyCellFailed {
                label: cell.label.clone(),
                failures,
                reps: n_reps,
            });
        }
        let theta = cell.true_value();
        let successes = points.len();
        let bias = mean(&points) - theta;
        let emp_se = sample_variance(&points).sqrt();
        let rmse = (points.iter().map(|p| (p - theta) * (p - theta)).sum::<f64>()
            / successes as f64)
            .sqrt();
        results.push(StudyResult {
            label: cell.label.clone(),
            estimand: cell.config.estimand,
            n: cell.dgp.n,
            m: cell.dgp.m,
            bias,
            emp_se,
            ase: mean(&ses),
            rmse,
            coverage: covered as f64 / successes as f64,
            ci_length: mean(&lengths),
            n_reps: successes,
            true_theta: theta,
            failures,
        });
    }
    Ok(results)
}

fn run_replication<F>(
    cell: &StudyCell,
    cell_index: usize,
    rep: usize,
    base_seed: u64,
    estimator: &F,
) -> Result<RepOutcome, Error>
where
    F: Fn(&SemiSupervisedDataset, &EstimatorConfig) -> Result<EstimateReport, Error> + Sync,
{
    let data_seed = mix_seed(base_seed, &[cell_index as u64, rep as u64, 0]);
    let est_seed = mix_seed(base_seed, &[cell_index as u64, rep as u64, 1]);
    let spec = DgpSpec {
        seed: data_seed,
        ..cell.dgp
    };
    let ds = draw_dataset(&spec)?;
    let mut cfg = cell.config.clone();
    cfg.seed = est_seed;
    let report = estimator(&ds, &cfg)?;
    let theta = cell.true_value();
    Ok(RepOutcome {
        point: report.point,
        std_error: report.std_error,
        covered: report.ci_lower <= theta && theta <= report.ci_upper,
        ci_length: report.ci_upper - report.ci_lower,
    })
}
