//! Seed derivation helpers.
//!
//! Every randomized unit of work (a tree in a forest, a sweep cell, a
//! synthetic simulation) gets its own RNG seeded from the master seed and a
//! stable stream label, so results do not depend on execution order or
//! worker count.

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent seed for stream `stream` under `master`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(master) ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// FNV-1a over a byte string; used to turn textual stream labels and config
/// echoes into stable 64-bit values.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Seed for a named unit of work, e.g. `cell_seed(seed, "rf:st=5:d=15")`.
pub fn cell_seed(master: u64, label: &str) -> u64 {
    derive_seed(master, fnv1a64(label.as_bytes()))
}
