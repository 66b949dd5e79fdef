use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::seed::mix_seed;

/// K-fold partition of labeled and unlabeled indices.
///
/// Labeled indices `0..n` are split into folds `I_1..I_K` and unlabeled
/// indices `0..m` into `J_1..J_K` (all empty when `m = 0`). The leave-one-out
/// and leave-two-out sets used by the cross-fitting procedure are pure
/// functions of this partition and are computed on demand.
///
/// Remainder rule: after shuffling, the first `n mod K` folds receive one
/// extra index, so fold sizes differ by at most one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    k_folds: usize,
    labeled_folds: Vec<Vec<usize>>,
    unlabeled_folds: Vec<Vec<usize>>,
    seed: u64,
}

fn partition(count: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut indices: Vec<usize> = (0..count).collect();
    indices.shuffle(rng);
    let base = count / k;
    let extra = count % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for fold_idx in 0..k {
        let size = base + usize::from(fold_idx < extra);
        let mut fold: Vec<usize> = indices[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    folds
}

impl FoldPlan {
    /// Builds the fold plan. Deterministic given `(n, m, k_folds, seed)`.
    pub fn new(n: usize, m: usize, k_folds: usize, seed: u64) -> Result<Self, Error> {
        if k_folds < 3 {
            return Err(Error::FoldPlan(format!(
                "algorithms require K >= 3 folds, got {k_folds}"
            )));
        }
        if n < k_folds {
            return Err(Error::FoldPlan(format!(
                "need at least K = {k_folds} labeled rows, got {n}"
            )));
        }
        if m > 0 && m < k_folds {
            return Err(Error::FoldPlan(format!(
                "unlabeled rows must be 0 or at least K = {k_folds}, got {m}"
            )));
        }
        let mut rng_l = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[0]));
        let mut rng_u = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[1]));
        Ok(Self {
            k_folds,
            labeled_folds: partition(n, k_folds, &mut rng_l),
            unlabeled_folds: partition(m, k_folds, &mut rng_u),
            seed,
        })
    }

    pub fn k_folds(&self) -> usize {
        self.k_folds
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n(&self) -> usize {
        self.labeled_folds.iter().map(Vec::len).sum()
    }

    pub fn m(&self) -> usize {
        self.unlabeled_folds.iter().map(Vec::len).sum()
    }

    /// Labeled fold `I_k` (sorted).
    pub fn labeled_fold(&self, k: usize) -> &[usize] {
        &self.labeled_folds[k]
    }

    /// Unlabeled fold `J_k` (sorted).
    pub fn unlabeled_fold(&self, k: usize) -> &[usize] {
        &self.unlabeled_folds[k]
    }

    /// Labeled indices outside folds `k` and `k_prime`.
    pub fn labeled_leave_two_out(&self, k: usize, k_prime: usize) -> Vec<usize> {
        self.leave_out(&self.labeled_folds, &[k, k_prime])
    }

    /// Unlabeled indices outside folds `k` and `k_prime`.
    pub fn unlabeled_leave_two_out(&self, k: usize, k_prime: usize) -> Vec<usize> {
        self.leave_out(&self.unlabeled_folds, &[k, k_prime])
    }

    /// Labeled indices outside fold `k` (the CATE training set for fold `k`).
    pub fn labeled_leave_one_out(&self, k: usize) -> Vec<usize> {
        self.leave_out(&self.labeled_folds, &[k])
    }

    fn leave_out(&self, folds: &[Vec<usize>], skip: &[usize]) -> Vec<usize> {
        let mut out = Vec::new();
        for (idx, fold) in folds.iter().enumerate() {
            if !skip.contains(&idx) {
                out.extend_from_slice(fold);
            }
        }
        out.sort_unstable();
        out
    }

    /// Fold index of each labeled row.
    pub fn labeled_fold_of(&self) -> Vec<usize> {
        let mut out = vec![0usize; self.n()];
        for (k, fold) in self.labeled_folds.iter().enumerate() {
            for &i in fold {
                out[i] = k;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_small_k_and_small_n() {
        assert!(FoldPlan::new(10, 0, 2, 1).is_err());
        assert!(FoldPlan::new(2, 0, 3, 1).is_err());
        assert!(FoldPlan::new(10, 2, 3, 1).is_err());
    }

    #[test]
    fn balanced_partition() {
        let plan = FoldPlan::new(9, 0, 3, 1).unwrap();
        for k in 0..3 {
            assert_eq!(plan.labeled_fold(k).len(), 3);
            assert!(plan.unlabeled_fold(k).is_empty());
        }
    }

    #[test]
    fn remainder_rule() {
        let plan = FoldPlan::new(10, 0, 3, 1).unwrap();
        let mut sizes: Vec<usize> = (0..3).map(|k| plan.labeled_fold(k).len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![3, 3, 4]);
    }

    #[test]
    fn counting_check_large() {
        let plan = FoldPlan::new(1000, 5000, 3, 7).unwrap();
        for k in 0..3 {
            let li = plan.labeled_fold(k).len();
            let ju = plan.unlabeled_fold(k).len();
            assert!(li == 333 || li == 334, "labeled fold size {li}");
            assert!(ju == 1666 || ju == 1667, "unlabeled fold size {ju}");
        }
        assert_eq!(plan.n(), 1000);
        assert_eq!(plan.m(), 5000);
    }

    #[test]
    fn deterministic_for_same_seed() {
        let a = FoldPlan::new(100, 50, 4, 99).unwrap();
        let b = FoldPlan::new(100, 50, 4, 99).unwrap();
        assert_eq!(a, b);
        let c = FoldPlan::new(100, 50, 4, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn leave_two_out_excludes_both_folds() {
        let plan = FoldPlan::new(30, 15, 3, 5).unwrap();
        let rest = plan.labeled_leave_two_out(0, 1);
        assert_eq!(rest, plan.labeled_fold(2));
        let rest_u = plan.unlabeled_leave_two_out(0, 2);
        assert_eq!(rest_u, plan.unlabeled_fold(1));
    }

    proptest! {
        #[test]
        fn partition_property(n in 3usize..200, m in 0usize..200, k in 3usize..6, seed: u64) {
            prop_assume!(n >= k && (m == 0 || m >= k));
            let plan = FoldPlan::new(n, m, k, seed).unwrap();
            let mut seen_l = vec![false; n];
            let mut seen_u = vec![false; m];
            let mut sizes_l = Vec::new();
            let mut sizes_u = Vec::new();
            for fold_idx in 0..k {
                for &i in plan.labeled_fold(fold_idx) {
                    prop_assert!(!seen_l[i], "labeled index {} in two folds", i);
                    seen_l[i] = true;
                }
                for &j in plan.unlabeled_fold(fold_idx) {
                    prop_assert!(!seen_u[j], "unlabeled index {} in two folds", j);
                    seen_u[j] = true;
                }
                sizes_l.push(plan.labeled_fold(fold_idx).len());
                sizes_u.push(plan.unlabeled_fold(fold_idx).len());
            }
            prop_assert!(seen_l.iter().all(|&s| s));
            prop_assert!(seen_u.iter().all(|&s| s));
            prop_assert!(sizes_l.iter().max().unwrap() - sizes_l.iter().min().unwrap() <= 1);
            if m > 0 {
                prop_assert!(sizes_u.iter().max().unwrap() - sizes_u.iter().min().unwrap() <= 1);
            }
        }
    }
}
