//! Seed derivation shared by deck shuffles and Monte Carlo rollouts.

/// SplitMix64 finalizer applied to `a` advanced by `b` golden-ratio steps.
///
/// Used to derive per-shuffle and per-rollout seeds from one master seed.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a.wrapping_add(b.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
