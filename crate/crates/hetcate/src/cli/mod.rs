//! Command implementations behind the `hetcate` binary.
//!
//! Exit-code contract: 0 success, 2 validation/configuration error,
//! 3 estimation failure, 4 unwritable output path.

mod config;
mod csvio;
mod report_file;

pub use config::{load_run_config, load_study_config, RunOverrides, StudyConfigFile};
pub use csvio::{read_labeled_csv, read_unlabeled_csv, write_labeled_csv, write_unlabeled_csv};
pub use report_file::{parse_report, render_report};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use thiserror::Error;

use crate::core_model::SemiSupervisedDataset;
use crate::error::Error as CoreError;
use crate::estimators::{estimate, UnlabeledMode};
use crate::simulation::{draw_dataset, run_study, DgpSpec, StudyResult};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Estimation(String),
    #[error("{0}")]
    Unwritable(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Estimation(_) => 3,
            CliError::Unwritable(_) => 4,
        }
    }

    pub(crate) fn validation(msg: String) -> Self {
        CliError::Validation(msg)
    }

    pub(crate) fn unwritable(msg: String) -> Self {
        CliError::Unwritable(msg)
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidDataset(_) | CoreError::InvalidArgument(_) | CoreError::FoldPlan(_) => {
                CliError::Validation(e.to_string())
            }
            CoreError::ArmAbsent { .. }
            | CoreError::SingleClass
            | CoreError::Solver(_)
            | CoreError::StudyCellFailed { .. } => CliError::Estimation(e.to_string()),
        }
    }
}

/// Inputs of the `estimate` subcommand.
#[derive(Debug, Default)]
pub struct EstimateArgs {
    pub labeled: PathBuf,
    pub unlabeled: Option<PathBuf>,
    pub config: Option<PathBuf>,
    pub flags: RunOverrides,
    pub out: Option<PathBuf>,
}

/// Reads the CSVs, resolves the configuration (flags over file over
/// defaults), runs the requested estimator, and returns the rendered
/// key-value report (also written to `out` when given).
pub fn cmd_estimate(args: &EstimateArgs) -> Result<String, CliError> {
    let file_layer = match &args.config {
        Some(path) => load_run_config(path)?,
        None => RunOverrides::default(),
    };
    let merged = args.flags.clone().merge_over(file_layer);
    let (cfg, w_columns) = merged.resolve()?;

    let (labeled_x, labeled_a, labeled_y) = read_labeled_csv(&args.labeled)?;
    let d = labeled_x.ncols();
    let (unlabeled_x, unlabeled_a) = match &args.unlabeled {
        Some(path) => read_unlabeled_csv(path)?,
        None => (Array2::zeros((0, d)), None),
    };
    if cfg.mode == UnlabeledMode::FullUnlabeled
        && unlabeled_x.nrows() > 0
        && unlabeled_a.is_none()
    {
        return Err(CliError::validation(
            "unlabeled file has no column \"a\"; rerun with --mode covariates-only".into(),
        ));
    }
    let w_columns = w_columns.unwrap_or_else(|| (0..d).collect());
    let ds = SemiSupervisedDataset::new(
        labeled_x, labeled_a, labeled_y, unlabeled_x, unlabeled_a, w_columns,
    )?;
    let validation = ds.validate();
    if !validation.ok() {
        return Err(CliError::validation(format!("invalid dataset: {validation}")));
    }

    let report = estimate(&ds, &cfg)?;
    let text = render_report(&report);
    if let Some(out) = &args.out {
        write_text(out, &text)?;
    }
    Ok(text)
}

/// Draws one dataset from the requested model and writes `labeled.csv` and
/// `unlabeled.csv` into `out_dir`. Byte-reproducible per seed.
pub fn cmd_simulate(
    model_id: u8,
    n: usize,
    m: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<(PathBuf, PathBuf), CliError> {
    let spec = DgpSpec::new(model_id, n, m, seed)?;
    let ds = draw_dataset(&spec)?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::unwritable(format!("cannot create {}: {e}", out_dir.display())))?;
    let labeled = out_dir.join("labeled.csv");
    let unlabeled = out_dir.join("unlabeled.csv");
    write_labeled_csv(&labeled, ds.labeled_x(), ds.labeled_a(), ds.labeled_y())?;
    write_unlabeled_csv(&unlabeled, ds.unlabeled_x(), ds.unlabeled_a())?;
    Ok((labeled, unlabeled))
}

/// Runs the study described by a TOML config and returns the rendered
/// results table (also written to `out` when given).
pub fn cmd_study(
    config_path: &Path,
    workers_override: Option<usize>,
    out: Option<&Path>,
) -> Result<String, CliError> {
    let (cells, reps, base_seed, workers) = load_study_config(config_path)?;
    let workers = workers_override.unwrap_or(workers);
    let results = run_study(&cells, reps, base_seed, workers)?;
    let table = render_study_table(&results);
    if let Some(path) = out {
        write_text(path, &table)?;
    }
    Ok(table)
}

/// Validates the CSV pair and returns "ok"; violations come back as a
/// validation error (exit 2) listing every problem.
pub fn cmd_validate(labeled: &Path, unlabeled: Option<&Path>) -> Result<String, CliError> {
    let (labeled_x, labeled_a, labeled_y) = read_labeled_csv(labeled)?;
    let d = labeled_x.ncols();
    let (unlabeled_x, unlabeled_a) = match unlabeled {
        Some(path) => read_unlabeled_csv(path)?,
        None => (Array2::zeros((0, d)), None),
    };
    let ds = SemiSupervisedDataset::new(
        labeled_x,
        labeled_a,
        labeled_y,
        unlabeled_x,
        unlabeled_a,
        (0..d).collect(),
    )?;
    let report = ds.validate();
    if report.ok() {
        Ok(format!("ok (n = {}, m = {}, d = {})\n", ds.n(), ds.m(), d))
    } else {
        Err(CliError::validation(report.to_string()))
    }
}

/// Tab-separated study table in the usual simulation-table layout.
pub fn render_study_table(results: &[StudyResult]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Method\tn\tm\tBias\tEmp SE\tASE\tRMSE\tAC\tLength\tFailures"
    );
    for r in results {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.3}\t{:.4}\t{}",
            r.label, r.n, r.m, r.bias, r.emp_se, r.ase, r.rmse, r.coverage, r.ci_length, r.failures
        );
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| {
                CliError::unwritable(format!("cannot create {}: {e}", parent.display()))
            })?;
        }
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::unwritable(format!("cannot write {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulate_shapes_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let out1 = dir.path().join("run1");
        let out2 = dir.path().join("run2");
        let (l1, u1) = cmd_simulate(1, 10, 5, 1, &out1).unwrap();
        let (l2, u2) = cmd_simulate(1, 10, 5, 1, &out2).unwrap();
        assert_eq!(std::fs::read(&l1).unwrap(), std::fs::read(&l2).unwrap());
        assert_eq!(std::fs::read(&u1).unwrap(), std::fs::read(&u2).unwrap());
        // 10 labeled rows; columns x0..x200 (intercept + 200 gaussians), a, y
        let text = std::fs::read_to_string(&l1).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert_eq!(header.split(',').count(), 203);
        assert!(header.starts_with("x0,x1,"));
        assert!(header.ends_with(",a,y"));
        assert_eq!(lines.count(), 10);
    }

    #[test]
    fn simulate_with_m_zero_writes_header_only_unlabeled() {
        let dir = tempfile::tempdir().unwrap();
        let (_, unlabeled) = cmd_simulate(3, 100, 0, 2, dir.path()).unwrap();
        let text = std::fs::read_to_string(&unlabeled).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(text.lines().next().unwrap().split(',').count(), 12);
    }

    #[test]
    fn estimate_round_trip_from_simulated_files() {
        let dir = tempfile::tempdir().unwrap();
        let (labeled, unlabeled) = cmd_simulate(3, 120, 60, 5, dir.path()).unwrap();
        let args = EstimateArgs {
            labeled,
            unlabeled: Some(unlabeled),
            config: None,
            flags: RunOverrides {
                estimand: Some("eth-ow".into()),
                seed: Some(7),
                lambda_mu: Some(0.05),
                lambda_pi: Some(0.05),
                lambda_beta: Some(0.05),
                ..Default::default()
            },
            out: Some(dir.path().join("report.txt")),
        };
        let text = cmd_estimate(&args).unwrap();
        let report = parse_report(&text).unwrap();
        assert_eq!(report.n, 120);
        assert_eq!(report.m, 60);
        let on_disk = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
        assert_eq!(on_disk, text);
        // deterministic end to end
        let text2 = cmd_estimate(&args).unwrap();
        assert_eq!(text, text2);
    }

    #[test]
    fn estimate_rejects_missing_arm_column_in_full_mode() {
        let dir = tempfile::tempdir().unwrap();
        let (labeled, _) = cmd_simulate(3, 60, 30, 5, dir.path()).unwrap();
        let stripped = dir.path().join("covariates_only.csv");
        // rewrite the unlabeled file without its a column
        let (x, _) = read_unlabeled_csv(&dir.path().join("unlabeled.csv")).unwrap();
        write_unlabeled_csv(&stripped, &x, None).unwrap();
        let args = EstimateArgs {
            labeled: labeled.clone(),
            unlabeled: Some(stripped.clone()),
            flags: RunOverrides {
                lambda_mu: Some(0.05),
                lambda_pi: Some(0.05),
                lambda_beta: Some(0.05),
                ..Default::default()
            },
            ..Default::default()
        };
        let err = cmd_estimate(&args).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("covariates-only"), "{err}");
        // and the suggested mode works
        let args = EstimateArgs {
            labeled,
            unlabeled: Some(stripped),
            flags: RunOverrides {
                mode: Some("covariates-only".into()),
                lambda_mu: Some(0.05),
                lambda_pi: Some(0.05),
                lambda_beta: Some(0.05),
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(cmd_estimate(&args).is_ok());
    }

    #[test]
    fn validate_flags_single_arm_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labeled.csv");
        std::fs::write(&path, "x0,x1,a,y\n1,0.5,1,2.0\n1,-0.2,1,1.0\n1,0.1,1,0.5\n").unwrap();
        let err = cmd_validate(&path, None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("treatment arm 0 absent"));
    }

    #[test]
    fn study_table_has_the_expected_columns() {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("study.toml");
        std::fs::write(
            &config,
            r#"
reps = 3
base_seed = 5

[defaults]
lambda_mu = 0.05
lambda_pi = 0.05
lambda_beta = 0.05
cate_learner = "lasso"

[[cells]]
estimand = "tth"
model = 3
n = 45
m = 21
"#,
        )
        .unwrap();
        let table = cmd_study(&config, Some(2), None).unwrap();
        let mut lines = table.lines();
        assert_eq!(
            lines.next().unwrap(),
            "Method\tn\tm\tBias\tEmp SE\tASE\tRMSE\tAC\tLength\tFailures"
        );
        assert_eq!(lines.count(), 1);
    }
}
