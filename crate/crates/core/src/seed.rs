//! Seed derivation.
//!
//! Every random stream in the crate is seeded from a root seed mixed with the
//! coordinates of the work item it serves (subtask, language, setup, index,
//! ...). Mixing is SplitMix64 folded over the parts; strings are first reduced
//! with 64-bit FNV-1a. Any single run can therefore be reconstructed without
//! replaying the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over raw bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One coordinate of a derived seed.
#[derive(Debug, Clone, Copy)]
pub enum SeedPart<'a> {
    Int(u64),
    Str(&'a str),
}

impl From<u64> for SeedPart<'_> {
    fn from(v: u64) -> Self {
        SeedPart::Int(v)
    }
}

impl From<usize> for SeedPart<'_> {
    fn from(v: usize) -> Self {
        SeedPart::Int(v as u64)
    }
}

impl<'a> From<&'a str> for SeedPart<'a> {
    fn from(v: &'a str) -> Self {
        SeedPart::Str(v)
    }
}

/// Folds `parts` into `root`: `s <- splitmix64(s ^ h(part))` for each part.
pub fn derive_seed(root: u64, parts: &[SeedPart<'_>]) -> u64 {
    parts.iter().fold(splitmix64(root), |acc, part| {
        let h = match *part {
            SeedPart::Int(v) => v,
            SeedPart::Str(s) => fnv1a64(s.as_bytes()),
        };
        splitmix64(acc ^ h)
    })
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
