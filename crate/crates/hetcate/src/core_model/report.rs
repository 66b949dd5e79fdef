use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::stats;

/// Which heterogeneity parameter an estimator targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimand {
    /// Total treatment heterogeneity Var[tau(X)].
    Tth,
    /// Explained heterogeneity of the linear working model, equal weights.
    EthDirect,
    /// Explained heterogeneity, optimally weighted, parametric nuisances.
    EthOw,
    /// Explained heterogeneity, optimally weighted, pluggable nuisances.
    EthSpow,
}

impl Estimand {
    pub const ALL: [Estimand; 4] = [
        Estimand::Tth,
        Estimand::EthDirect,
        Estimand::EthOw,
        Estimand::EthSpow,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Estimand::Tth => "TTH",
            Estimand::EthDirect => "ETH_DIRECT",
            Estimand::EthOw => "ETH_OW",
            Estimand::EthSpow => "ETH_SPOW",
        }
    }
}

impl fmt::Display for Estimand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Estimand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "tth" => Ok(Estimand::Tth),
            "eth-direct" | "eth" => Ok(Estimand::EthDirect),
            "eth-ow" | "ow" => Ok(Estimand::EthOw),
            "eth-spow" | "spow" => Ok(Estimand::EthSpow),
            other => Err(Error::invalid(format!(
                "unknown estimand '{other}'; valid names: tth, eth-direct, eth-ow, eth-spow"
            ))),
        }
    }
}

/// Per-unit weights on labeled and unlabeled rows in the plug-in component.
///
/// The unbiasedness constraint `n * omega_l + m * omega_u = 1` is asserted at
/// construction; one weight may be negative as long as the constraint holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightPair {
    pub omega_l: f64,
    pub omega_u: f64,
    pub n: usize,
    pub m: usize,
    /// True when the projection variance was too degenerate to trust the
    /// optimal-weight formula and equal weights were used instead.
    pub degenerate: bool,
}

impl WeightPair {
    pub fn new(omega_l: f64, omega_u: f64, n: usize, m: usize, degenerate: bool) -> Self {
        let total = n as f64 * omega_l + m as f64 * omega_u;
        let scale = 1.0 + (n as f64 * omega_l).abs() + (m as f64 * omega_u).abs();
        assert!(
            (total - 1.0).abs() <= 1e-12 * scale,
            "weight constraint violated: n*omega_l + m*omega_u = {total}"
        );
        Self {
            omega_l,
            omega_u,
            n,
            m,
            degenerate,
        }
    }

    /// Equal weights 1/N, the direct semi-supervised choice.
    pub fn equal(n: usize, m: usize) -> Self {
        let total = (n + m) as f64;
        if m == 0 {
            Self::new(1.0 / n as f64, 0.0, n, m, false)
        } else {
            Self::new(1.0 / total, 1.0 / total, n, m, false)
        }
    }
}

/// Per-fold moment diagnostics attached to ETH reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldDiagnostics {
    pub fold: usize,
    pub a_hat: f64,
    pub b_hat: f64,
    pub c_hat: f64,
    pub omega_l: f64,
    pub omega_u: f64,
}

/// Point estimate with inference for one estimand.
///
/// `std_error` is on the estimate scale (sigma_hat / sqrt(n)); the one-sided
/// p-value tests H0: theta = 0 against H1: theta > 0. Negative point
/// estimates are reported unmodified -- debiased variance estimates can be
/// negative in finite samples and the one-sided test handles them naturally.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub estimand: Estimand,
    pub point: f64,
    pub std_error: f64,
    pub ci_level: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub p_value_one_sided: f64,
    /// The internal ATE estimate used for centering.
    pub ate_hat: f64,
    pub n: usize,
    pub m: usize,
    pub k_folds: usize,
    pub seed: u64,
    pub diagnostics: Vec<FoldDiagnostics>,
}

impl EstimateReport {
    /// Assembles a report from a point estimate and its standard error,
    /// filling in the confidence interval and one-sided p-value.
    #[allow(clippy::too_many_arguments)]
    pub fn from_point(
        estimand: Estimand,
        point: f64,
        std_error: f64,
        ci_level: f64,
        ate_hat: f64,
        n: usize,
        m: usize,
        k_folds: usize,
        seed: u64,
        diagnostics: Vec<FoldDiagnostics>,
    ) -> Self {
        let z = stats::normal_quantile_two_sided(ci_level);
        let half = z * std_error;
        let p_value_one_sided = if std_error > 0.0 {
            1.0 - stats::standard_normal_cdf(point / std_error)
        } else if point > 0.0 {
            0.0
        } else {
            1.0
        };
        Self {
            estimand,
            point,
            std_error,
            ci_level,
            ci_lower: point - half,
            ci_upper: point + half,
            p_value_one_sided,
            ate_hat,
            n,
            m,
            k_folds,
            seed,
            diagnostics,
        }
    }
}
