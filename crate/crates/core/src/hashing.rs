//! Fixed 64-bit FNV-1a hashing.
//!
//! Both the hashing embedder and the scripted LLM mock need a hash that is
//! stable across platforms, processes, and releases, which rules out
//! `std::hash`. FNV-1a is tiny and has well-known constants.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a with the standard offset basis.
pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    fnv1a64_seeded(FNV_OFFSET, bytes)
}

/// FNV-1a from an arbitrary starting state, used to derive independent
/// hash functions from the same input.
pub(crate) fn fnv1a64_seeded(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = seed;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}
