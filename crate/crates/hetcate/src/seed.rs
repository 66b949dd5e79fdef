//! Deterministic seed derivation.
//!
//! Every randomized step (fold shuffling, per-fold-pair nuisance fits,
//! cross-validation splits, simulation replications) derives its own seed
//! from a base seed plus integer tags via repeated splitmix64 steps. The mix
//! is pure integer arithmetic, so derived streams are identical across
//! platforms and independent of evaluation order.

/// One splitmix64 step: advances `state` and returns the mixed output.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and a sequence of tags.
///
/// `mix_seed(s, &[a, b])` differs from `mix_seed(s, &[b, a])` and from
/// `mix_seed(s, &[a])`, so nested derivations never collide by accident.
pub fn mix_seed(base: u64, tags: &[u64]) -> u64 {
    let mut state = base;
    let mut out = splitmix64(&mut state);
    for &t in tags {
        state ^= t.wrapping_mul(0xD605_1C87_01C6_2D9D).wrapping_add(1);
        out = splitmix64(&mut state);
    }
    out
}
