//! Seed derivation and the RNG used throughout the simulator.
//!
//! Every random stream is keyed by a `u64` seed. Seeds for sub-streams and
//! replications are derived with SplitMix64 so that they depend only on
//! their inputs, never on the order in which streams are created.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator behind every stream in the simulator.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// One SplitMix64 output step.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for numbered sub-stream `stream` of `seed`.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(stream.wrapping_add(0xA076_1D64_78BD_642F)))
}

/// Seed for a named role within replication `replication` of an experiment.
pub fn derive_seed(master_seed: u64, replication: u64, role: &str) -> u64 {
    sub_seed(sub_seed(master_seed, replication), fnv1a(role.as_bytes()))
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325_u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}
