//! Deterministic seed derivation so that independent random streams (channel
//! draws, beamformer randomization, echo noise) never overlap.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent sub-seed from a base seed and a stream salt.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    mix(seed ^ mix(salt))
}

/// Seeded generator for a named stream.
pub fn stream_rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, salt))
}

/// Stream salts used across the crate.
pub mod salt {
    pub const GAINS: u64 = 0x47_41_49_4E;
    pub const RAYLEIGH: u64 = 0x52_41_59_4C;
    pub const RANDOMIZATION: u64 = 0x47_41_55_53;
    pub const ECHOES: u64 = 0x45_43_48_4F;
}
