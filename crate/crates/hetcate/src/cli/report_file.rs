//! Flat key-value report documents.
//!
//! One `key = value` line per field, with per-fold diagnostics under indexed
//! keys (`fold.2.b_hat = ...`). Floats use Rust's shortest round-trip
//! formatting, so a written report parses back into an identical
//! `EstimateReport`.

use std::fmt::Write as _;

use crate::core_model::{Estimand, EstimateReport, FoldDiagnostics};

use super::CliError;

pub fn render_report(report: &EstimateReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "estimand = {}", report.estimand);
    let _ = writeln!(out, "point = {}", report.point);
    let _ = writeln!(out, "std_error = {}", report.std_error);
    let _ = writeln!(out, "ci_level = {}", report.ci_level);
    let _ = writeln!(out, "ci_lower = {}", report.ci_lower);
    let _ = writeln!(out, "ci_upper = {}", report.ci_upper);
    let _ = writeln!(out, "p_one_sided = {}", report.p_value_one_sided);
    let _ = writeln!(out, "ate_hat = {}", report.ate_hat);
    let _ = writeln!(out, "n = {}", report.n);
    let _ = writeln!(out, "m = {}", report.m);
    let _ = writeln!(out, "k_folds = {}", report.k_folds);
    let _ = writeln!(out, "seed = {}", report.seed);
    for diag in &report.diagnostics {
        let k = diag.fold;
        let _ = writeln!(out, "fold.{k}.a_hat = {}", diag.a_hat);
        let _ = writeln!(out, "fold.{k}.b_hat = {}", diag.b_hat);
        let _ = writeln!(out, "fold.{k}.c_hat = {}", diag.c_hat);
        let _ = writeln!(out, "fold.{k}.omega_l = {}", diag.omega_l);
        let _ = writeln!(out, "fold.{k}.omega_u = {}", diag.omega_u);
    }
    out
}

pub fn parse_report(text: &str) -> Result<EstimateReport, CliError> {
    let mut fields = std::collections::BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::validation(format!("report line {}: expected 'key = value'", idx + 1))
        })?;
        fields.insert(key.trim().to_string(), value.trim().to_string());
    }
    let get = |key: &str| {
        fields
            .get(key)
            .ok_or_else(|| CliError::validation(format!("report is missing key '{key}'")))
    };
    let f64_field = |key: &str| -> Result<f64, CliError> {
        get(key)?
            .parse::<f64>()
            .map_err(|_| CliError::validation(format!("report key '{key}' is not a number")))
    };
    let usize_field = |key: &str| -> Result<usize, CliError> {
        get(key)?
            .parse::<usize>()
            .map_err(|_| CliError::validation(format!("report key '{key}' is not a count")))
    };

    let estimand: Estimand = get("estimand")?
        .parse()
        .map_err(|e| CliError::validation(format!("{e}")))?;

    let mut diagnostics = Vec::new();
    let mut fold = 0usize;
    while fields.contains_key(&format!("fold.{fold}.a_hat")) {
        diagnostics.push(FoldDiagnostics {
            fold,
            a_hat: f64_field(&format!("fold.{fold}.a_hat"))?,
            b_hat: f64_field(&format!("fold.{fold}.b_hat"))?,
            c_hat: f64_field(&format!("fold.{fold}.c_hat"))?,
            omega_l: f64_field(&format!("fold.{fold}.omega_l"))?,
            omega_u: f64_field(&format!("fold.{fold}.omega_u"))?,
        });
        fold += 1;
    }

    Ok(EstimateReport {
        estimand,
        point: f64_field("point")?,
        std_error: f64_field("std_error")?,
        ci_level: f64_field("ci_level")?,
        ci_lower: f64_field("ci_lower")?,
        ci_upper: f64_field("ci_upper")?,
        p_value_one_sided: f64_field("p_one_sided")?,
        ate_hat: f64_field("ate_hat")?,
        n: usize_field("n")?,
        m: usize_field("m")?,
        k_folds: usize_field("k_folds")?,
        seed: get("seed")?
            .parse::<u64>()
            .map_err(|_| CliError::validation("report key 'seed' is not an integer".into()))?,
        diagnostics,
    })
}
