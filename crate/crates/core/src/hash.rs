//! Stable hashing. The coverage bitmap index and the program digest must not
//! change across runs, platforms, or std versions, so we use FNV-1a instead
//! of `std::hash`.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over a byte string.
pub fn stable_hash64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Hex digest of a text artifact (used to fingerprint programs in reports).
pub fn hex_digest(text: &str) -> String {
    // Two passes with different salts; 128 bits is plenty for an identity
    // fingerprint.
    let lo = stable_hash64(text.as_bytes());
    let mut salted = vec![0x9eu8];
    salted.extend_from_slice(text.as_bytes());
    let hi = stable_hash64(&salted);
    format!("{hi:016x}{lo:016x}")
}
