//! Cross-fitted plug-in moments (A, B, C), the optimal labeled/unlabeled
//! weights, and the optimally weighted variance.
//!
//! Per fold, with projections `v_i = D_i . beta` (centered working-model
//! predictions) and debias residuals `e_i`:
//!
//! ```text
//!     Q = mean_{G_k} v^2                 (plug-in ETH on the fold)
//!     A = mean_{I_k} (2 e v)^2           (variance of the debias term)
//!     B = mean_{G_k} v^4 - Q^2           (variance of the squared projection)
//!     C = mean_{I_k} (2 e v) (v^2 - Q)   (their covariance)
//! ```
//!
//! The optimal weights and variance follow from minimizing the re-weighted
//! asymptotic variance subject to `n w_L + m w_U = 1`.

use crate::core_model::WeightPair;

/// Degeneracy floor: below `1e-8 Q^2 + 1e-12` the projection spread is too
/// small for the C/B ratio to be stable, so weights fall back to 1/N and the
/// variance to the equal-weight form.
const B_FLOOR_REL: f64 = 1e-8;
const B_FLOOR_ABS: f64 = 1e-12;

/// Per-fold plug-in moments. `b_hat` keeps its raw (possibly slightly
/// negative) value for diagnostics; variance formulas floor it at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentTriple {
    pub a_hat: f64,
    pub b_hat: f64,
    pub c_hat: f64,
    pub q_hat: f64,
    pub fold: usize,
}

/// Computes the fold moments from the labeled residuals and the projections
/// on the labeled (`I_k`) and full (`G_k`) fold.
pub fn compute_moments(
    fold: usize,
    eps_labeled: &[f64],
    proj_labeled: &[f64],
    proj_all: &[f64],
) -> MomentTriple {
    assert_eq!(eps_labeled.len(), proj_labeled.len());
    let n_l = proj_labeled.len().max(1) as f64;
    let n_g = proj_all.len().max(1) as f64;

    let q_hat = proj_all.iter().map(|v| v * v).sum::<f64>() / n_g;
    let fourth = proj_all.iter().map(|v| v * v * v * v).sum::<f64>() / n_g;
    let b_hat = fourth - q_hat * q_hat;

    let mut a_hat = 0.0;
    let mut c_hat = 0.0;
    for (e, v) in eps_labeled.iter().zip(proj_labeled) {
        let debias = 2.0 * e * v;
        a_hat += debias * debias;
        c_hat += debias * (v * v - q_hat);
    }
    a_hat /= n_l;
    c_hat /= n_l;

    MomentTriple {
        a_hat,
        b_hat,
        c_hat,
        q_hat,
        fold,
    }
}

impl MomentTriple {
    /// True when the projection variance sits below the degeneracy floor.
    pub fn degenerate(&self) -> bool {
        self.b_hat < B_FLOOR_REL * self.q_hat * self.q_hat + B_FLOOR_ABS
    }

    /// The fold's weight pair: the optimal formula when `B` is usable,
    /// otherwise equal weights with the degeneracy flag set.
    pub fn weights(&self, n: usize, m: usize) -> WeightPair {
        if m == 0 {
            WeightPair::new(1.0 / n as f64, 0.0, n, m, false)
        } else if self.degenerate() {
            let total = (n + m) as f64;
            WeightPair::new(1.0 / total, 1.0 / total, n, m, true)
        } else {
            optimal_weights(self.b_hat, self.c_hat, n, m)
        }
    }

    /// The fold's contribution to the optimally weighted variance, or the
    /// equal-weight (direct) variance when degenerate.
    pub fn fold_variance_ow(&self, n: usize, m: usize) -> f64 {
        if self.degenerate() {
            self.fold_variance_direct(n, m)
        } else {
            ow_variance(self.a_hat, self.b_hat, self.c_hat, n, m)
        }
    }

    /// Equal-weight variance `A + (n/N) B + 2 (n/N) C`, with B floored at 0.
    pub fn fold_variance_direct(&self, n: usize, m: usize) -> f64 {
        let frac = n as f64 / (n + m) as f64;
        self.a_hat + frac * self.b_hat.max(0.0) + 2.0 * frac * self.c_hat
    }
}

/// Optimal weights `w_L = (n B - m C) / (n N B)`, `w_U = (B + C) / (N B)`.
/// The constraint `n w_L + m w_U = 1` holds identically. When `m = 0` the
/// supervised pair `(1/n, 0)` is returned; a non-positive `B` falls back to
/// equal weights with the degeneracy flag.
pub fn optimal_weights(b_hat: f64, c_hat: f64, n: usize, m: usize) -> WeightPair {
    let total = (n + m) as f64;
    if m == 0 {
        return WeightPair::new(1.0 / n as f64, 0.0, n, m, false);
    }
    if b_hat <= B_FLOOR_ABS {
        return WeightPair::new(1.0 / total, 1.0 / total, n, m, true);
    }
    let nf = n as f64;
    let mf = m as f64;
    let omega_l = (nf * b_hat - mf * c_hat) / (nf * total * b_hat);
    let omega_u = (b_hat + c_hat) / (total * b_hat);
    WeightPair::new(omega_l, omega_u, n, m, false)
}

/// Optimally weighted asymptotic variance
/// `A + n B / N + 2 n C / N - m C^2 / (N B)`, assuming `B > 0`.
///
/// Computed as the equal-weight variance minus the non-negative improvement
/// term, so it never exceeds the equal-weight variance even in floating
/// point. With `m = 0` it reduces to the supervised `A + B + 2C`.
pub fn ow_variance(a_hat: f64, b_hat: f64, c_hat: f64, n: usize, m: usize) -> f64 {
    let total = (n + m) as f64;
    let frac = n as f64 / total;
    let direct = a_hat + frac * b_hat + 2.0 * frac * c_hat;
    if m == 0 {
        return direct;
    }
    direct - (m as f64) * c_hat * c_hat / (total * b_hat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn moments_hand_checks() {
        // all projections zero
        let m = compute_moments(0, &[1.0, -2.0], &[0.0, 0.0], &[0.0, 0.0, 0.0]);
        assert_eq!((m.a_hat, m.b_hat, m.c_hat, m.q_hat), (0.0, 0.0, 0.0, 0.0));
        // constant projections: B = c^4 - (c^2)^2 = 0
        let m = compute_moments(0, &[1.0, 1.0], &[3.0, 3.0], &[3.0, 3.0, 3.0, 3.0]);
        assert_abs_diff_eq!(m.b_hat, 0.0, epsilon = 1e-9);
        assert!(m.degenerate());
    }

    #[test]
    fn moments_match_an_independent_loop() {
        // duplicate-implementation oracle on a random 50-row fold
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(123);
        let eps: Vec<f64> = (0..50).map(|_| rng.random_range(-2.0..2.0)).collect();
        let proj_l: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut proj_g = proj_l.clone();
        proj_g.extend((0..70).map(|_| rng.random_range(-1.0..1.0)));

        let m = compute_moments(2, &eps, &proj_l, &proj_g);

        let q: f64 = proj_g.iter().map(|v| v.powi(2)).sum::<f64>() / proj_g.len() as f64;
        let b: f64 = proj_g.iter().map(|v| v.powi(4)).sum::<f64>() / proj_g.len() as f64 - q * q;
        let a: f64 = eps
            .iter()
            .zip(&proj_l)
            .map(|(e, v)| (2.0 * e * v).powi(2))
            .sum::<f64>()
            / 50.0;
        let c: f64 = eps
            .iter()
            .zip(&proj_l)
            .map(|(e, v)| 2.0 * e * v * (v * v - q))
            .sum::<f64>()
            / 50.0;
        assert_abs_diff_eq!(m.q_hat, q, epsilon = 1e-12);
        assert_abs_diff_eq!(m.a_hat, a, epsilon = 1e-12);
        assert_abs_diff_eq!(m.b_hat, b, epsilon = 1e-12);
        assert_abs_diff_eq!(m.c_hat, c, epsilon = 1e-12);
    }

    #[test]
    fn zero_covariance_gives_equal_weights() {
        let w = optimal_weights(2.0, 0.0, 100, 400);
        assert_abs_diff_eq!(w.omega_l, 1.0 / 500.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w.omega_u, 1.0 / 500.0, epsilon = 1e-15);
    }

    #[test]
    fn c_equals_minus_b_recovers_supervised_weighting() {
        let w = optimal_weights(2.0, -2.0, 100, 400);
        assert_abs_diff_eq!(w.omega_u, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w.omega_l, 1.0 / 100.0, epsilon = 1e-15);
    }

    #[test]
    fn weights_hand_evaluation() {
        // B=2, C=1, n=100, m=400: w_L = (200 - 400)/100000 = -0.002,
        // w_U = 3/1000 = 0.003, constraint -0.2 + 1.2 = 1
        let w = optimal_weights(2.0, 1.0, 100, 400);
        assert_abs_diff_eq!(w.omega_l, -0.002, epsilon = 1e-15);
        assert_abs_diff_eq!(w.omega_u, 0.003, epsilon = 1e-15);
        assert_abs_diff_eq!(
            100.0 * w.omega_l + 400.0 * w.omega_u,
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn ow_variance_hand_evaluation() {
        // A=1, B=1, C=0, n=100, N=500: 1 + 100/500 = 1.2
        assert_abs_diff_eq!(ow_variance(1.0, 1.0, 0.0, 100, 400), 1.2, epsilon = 1e-12);
        // m=0 reduces to the supervised A + B + 2C
        assert_abs_diff_eq!(
            ow_variance(1.0, 2.0, -0.5, 100, 0),
            1.0 + 2.0 - 1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn safety_ordering_on_random_triples() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20_000 {
            let a: f64 = rng.random_range(0.0..10.0);
            let b: f64 = rng.random_range(1e-6..10.0);
            let c: f64 = rng.random_range(-10.0..10.0);
            let n: usize = rng.random_range(2..2000);
            let m: usize = rng.random_range(1..20_000);
            let total = (n + m) as f64;
            let frac = n as f64 / total;
            let ow = ow_variance(a, b, c, n, m);
            let direct = a + frac * b + 2.0 * frac * c;
            let supervised = a + b + 2.0 * c;
            assert!(ow <= direct, "ow {ow} > direct {direct}");
            let slack = 1e-12 * (1.0 + supervised.abs() + ow.abs());
            assert!(ow <= supervised + slack, "ow {ow} > supervised {supervised}");
        }
    }

    #[test]
    fn degenerate_triple_falls_back() {
        let m = MomentTriple {
            a_hat: 1.0,
            b_hat: 1e-14,
            c_hat: 5.0,
            q_hat: 1.0,
            fold: 0,
        };
        assert!(m.degenerate());
        let w = m.weights(10, 40);
        assert!(w.degenerate);
        assert_abs_diff_eq!(w.omega_l, 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(m.fold_variance_ow(10, 40), m.fold_variance_direct(10, 40));
    }
}
