//! Named random substreams derived from one master seed.
//!
//! Every consumer of randomness (data, init, noise, split, ...) gets its own
//! ChaCha stream so components can be varied independently.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as StreamRng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Seed for the substream `name` of `master`.
pub fn derive_seed(master: u64, name: &str) -> u64 {
    splitmix64(splitmix64(master) ^ fnv1a(name))
}

/// Seed for the `index`-th member of the substream family `name`.
pub fn derive_indexed_seed(master: u64, name: &str, index: u64) -> u64 {
    splitmix64(derive_seed(master, name) ^ splitmix64(index.wrapping_add(1)))
}

pub fn stream(master: u64, name: &str) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, name))
}

pub fn indexed_stream(master: u64, name: &str, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(derive_indexed_seed(master, name, index))
}
