//! Seeded random streams.
//!
//! Every stochastic component draws from a `ChaCha8Rng` whose seed is derived
//! from a master seed plus a path of labels (case id, agent id, episode
//! index, ...). Derivation is a fixed FNV-1a / SplitMix64 mix so streams are
//! stable across platforms, thread counts and toolchain versions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over raw bytes.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Label component of a stream path.
#[derive(Debug, Clone, Copy)]
pub enum Label<'a> {
    Str(&'a str),
    Num(u64),
}

impl<'a> From<&'a str> for Label<'a> {
    fn from(s: &'a str) -> Self {
        Label::Str(s)
    }
}

impl From<u64> for Label<'_> {
    fn from(n: u64) -> Self {
        Label::Num(n)
    }
}

impl From<usize> for Label<'_> {
    fn from(n: usize) -> Self {
        Label::Num(n as u64)
    }
}

/// Derive a child seed from `master` and a label path.
pub fn derive_seed(master: u64, path: &[Label<'_>]) -> u64 {
    let mut s = mix64(master);
    for label in path {
        let h = match label {
            Label::Str(v) => fnv1a(v.as_bytes()),
            Label::Num(n) => mix64(*n ^ 0xA5A5_A5A5_A5A5_A5A5),
        };
        s = mix64(s ^ h);
    }
    s
}

pub fn stream(master: u64, path: &[Label<'_>]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, path))
}

pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
