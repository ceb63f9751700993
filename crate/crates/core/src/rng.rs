//! Seed derivation for independent, order-free random streams.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `seed` with a path of indices into a new seed. Distinct paths give
/// statistically unrelated seeds; the result depends only on the inputs.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed.wrapping_add(GOLDEN)), |acc, &p| {
            splitmix64(acc ^ p.wrapping_add(GOLDEN).wrapping_mul(GOLDEN))
        })
}
