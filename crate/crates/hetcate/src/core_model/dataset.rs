use std::fmt;

use ndarray::Array2;

use crate::error::Error;

/// Labeled triples `(x, a, y)` plus unlabeled covariate rows, the single
/// input of every estimator.
///
/// Column 0 of both design matrices must be the constant 1 intercept column;
/// the dataset never prepends it silently, so user column indices stay
/// stable. `w_columns` selects the sub-vector `W` of `X` used by the linear
/// working CATE model (it must contain column 0).
#[derive(Debug, Clone)]
pub struct SemiSupervisedDataset {
    labeled_x: Array2<f64>,
    labeled_a: Vec<u8>,
    labeled_y: Vec<f64>,
    unlabeled_x: Array2<f64>,
    unlabeled_a: Option<Vec<u8>>,
    w_columns: Vec<usize>,
}

/// Outcome of [`SemiSupervisedDataset::validate`]: either ok or a list of
/// violations. Estimators refuse datasets whose report is not ok.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    violations: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations(&self) -> &[String] {
        &self.violations
    }

    fn push(&mut self, msg: impl Into<String>) {
        self.violations.push(msg.into());
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok() {
            write!(f, "ok")
        } else {
            write!(f, "{}", self.violations.join("; "))
        }
    }
}

impl SemiSupervisedDataset {
    /// Builds a dataset, checking only structural consistency (matching row
    /// counts and column widths). Value-level problems -- missing intercept,
    /// single-arm treatment, NaN entries, bad `w_columns` -- are reported by
    /// [`validate`](Self::validate) instead, so diagnostics can list all of
    /// them at once.
    pub fn new(
        labeled_x: Array2<f64>,
        labeled_a: Vec<u8>,
        labeled_y: Vec<f64>,
        unlabeled_x: Array2<f64>,
        unlabeled_a: Option<Vec<u8>>,
        w_columns: Vec<usize>,
    ) -> Result<Self, Error> {
        let n = labeled_x.nrows();
        let m = unlabeled_x.nrows();
        if n == 0 {
            return Err(Error::invalid("labeled data must contain at least one row"));
        }
        if labeled_x.ncols() == 0 {
            return Err(Error::invalid("design matrix must have at least one column"));
        }
        if labeled_a.len() != n || labeled_y.len() != n {
            return Err(Error::invalid(format!(
                "labeled lengths disagree: x has {n} rows, a has {}, y has {}",
                labeled_a.len(),
                labeled_y.len()
            )));
        }
        if m > 0 && unlabeled_x.ncols() != labeled_x.ncols() {
            return Err(Error::invalid(format!(
                "unlabeled x has {} columns, labeled x has {}",
                unlabeled_x.ncols(),
                labeled_x.ncols()
            )));
        }
        if let Some(ua) = &unlabeled_a {
            if ua.len() != m {
                return Err(Error::invalid(format!(
                    "unlabeled a has length {}, expected {m}",
                    ua.len()
                )));
            }
        }
        Ok(Self {
            labeled_x,
            labeled_a,
            labeled_y,
            unlabeled_x,
            unlabeled_a,
            w_columns,
        })
    }

    /// Convenience constructor for purely supervised data (m = 0), with
    /// `W = X` (all columns).
    pub fn supervised(
        labeled_x: Array2<f64>,
        labeled_a: Vec<u8>,
        labeled_y: Vec<f64>,
    ) -> Result<Self, Error> {
        let d = labeled_x.ncols();
        let w = (0..d).collect();
        Self::new(
            labeled_x,
            labeled_a,
            labeled_y,
            Array2::zeros((0, d)),
            None,
            w,
        )
    }

    pub fn n(&self) -> usize {
        self.labeled_x.nrows()
    }

    pub fn m(&self) -> usize {
        self.unlabeled_x.nrows()
    }

    /// Total sample size N = n + m.
    pub fn total(&self) -> usize {
        self.n() + self.m()
    }

    pub fn num_columns(&self) -> usize {
        self.labeled_x.ncols()
    }

    pub fn labeled_x(&self) -> &Array2<f64> {
        &self.labeled_x
    }

    pub fn labeled_a(&self) -> &[u8] {
        &self.labeled_a
    }

    pub fn labeled_y(&self) -> &[f64] {
        &self.labeled_y
    }

    pub fn unlabeled_x(&self) -> &Array2<f64> {
        &self.unlabeled_x
    }

    pub fn unlabeled_a(&self) -> Option<&[u8]> {
        self.unlabeled_a.as_deref()
    }

    pub fn w_columns(&self) -> &[usize] {
        &self.w_columns
    }

    /// Returns a copy with the unlabeled treatment column dropped.
    pub fn without_unlabeled_treatments(&self) -> Self {
        let mut out = self.clone();
        out.unlabeled_a = None;
        out
    }

    /// Checks every value-level invariant and returns the full list of
    /// violations. NaN or infinite entries anywhere are violations; nothing
    /// is ever imputed.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let d = self.num_columns();

        for (i, row) in self.labeled_x.outer_iter().enumerate() {
            if (row[0] - 1.0).abs() > 0.0 {
                report.push(format!(
                    "intercept column not constant 1: labeled row {i} has x0 = {}",
                    row[0]
                ));
                break;
            }
        }
        for (i, row) in self.unlabeled_x.outer_iter().enumerate() {
            if (row[0] - 1.0).abs() > 0.0 {
                report.push(format!(
                    "intercept column not constant 1: unlabeled row {i} has x0 = {}",
                    row[0]
                ));
                break;
            }
        }

        if self.labeled_x.iter().any(|v| !v.is_finite())
            || self.unlabeled_x.iter().any(|v| !v.is_finite())
        {
            report.push("design matrix contains NaN or infinite entries");
        }
        if self.labeled_y.iter().any(|v| !v.is_finite()) {
            report.push("outcome vector contains NaN or infinite entries");
        }

        if self.labeled_a.iter().any(|&a| a > 1) {
            report.push("labeled treatment indicators must be 0 or 1");
        }
        if let Some(ua) = &self.unlabeled_a {
            if ua.iter().any(|&a| a > 1) {
                report.push("unlabeled treatment indicators must be 0 or 1");
            }
        }
        if !self.labeled_a.iter().any(|&a| a == 0) {
            report.push("treatment arm 0 absent among labeled rows");
        }
        if !self.labeled_a.iter().any(|&a| a == 1) {
            report.push("treatment arm 1 absent among labeled rows");
        }

        if !self.w_columns.contains(&0) {
            report.push("w_columns must contain column 0 (the intercept)");
        }
        if self.w_columns.windows(2).any(|w| w[1] <= w[0]) {
            report.push("w_columns must be sorted and duplicate-free");
        }
        if self.w_columns.iter().any(|&c| c >= d) {
            report.push(format!("w_columns out of range: indices must be < {d}"));
        }

        report
    }
}
