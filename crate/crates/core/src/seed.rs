//! Named sub-seeds derived from one root seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the component called `name` under `root`.
pub fn sub_seed(root: u64, name: &str) -> u64 {
    let mut h = splitmix(root);
    for b in name.bytes() {
        h = splitmix(h ^ u64::from(b));
    }
    h
}

/// Seed for item `index` of a component, e.g. one batch of one domain.
pub fn indexed_seed(seed: u64, index: u64) -> u64 {
    splitmix(seed ^ splitmix(index))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
