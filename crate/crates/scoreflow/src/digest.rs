//! Stable content digests and seeded hashing.
//!
//! Everything that needs an identity (workflow programs, banks, configs) or a
//! reproducible random decision (planted noise flips) goes through SHA-256 so
//! results are identical across runs, hosts, and thread schedules.

use sha2::{Digest, Sha256};

/// Hex-encoded SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of a text document (full 64 hex chars).
pub fn text_digest(text: &str) -> String {
    sha256_hex(text.as_bytes())
}

/// Short digest for traces and log lines.
pub fn short_digest(text: &str) -> String {
    text_digest(text)[..16].to_string()
}

/// Collapse labelled byte parts into a u64, order-sensitive.
///
/// Parts are length-prefixed before hashing so `["ab","c"]` and `["a","bc"]`
/// cannot collide.
pub fn hash_to_u64(parts: &[&[u8]]) -> u64 {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    let out = hasher.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("sha256 output is 32 bytes"))
}

/// Map labelled parts to a uniform value in `[0, 1)`.
pub fn hash_to_unit(parts: &[&[u8]]) -> f64 {
    // 53 mantissa bits keep the quotient exactly representable.
    const DENOM: f64 = (1u64 << 53) as f64;
    (hash_to_u64(parts) >> 11) as f64 / DENOM
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digests_are_stable() {
        assert_eq!(
            text_digest("workflow"),
            "da7f739f627198465eeab537a6f7a435dc4a0c332f9e4a8462293eb3f4ab7ee0"
        );
        assert_eq!(short_digest("workflow").len(), 16);
    }

    #[test]
    fn hash_parts_are_length_prefixed() {
        let a = hash_to_u64(&[b"ab", b"c"]);
        let b = hash_to_u64(&[b"a", b"bc"]);
        assert_ne!(a, b);
    }

    #[test]
    fn unit_hash_in_range() {
        for i in 0u64..1000 {
            let u = hash_to_unit(&[&i.to_le_bytes()]);
            assert!((0.0..1.0).contains(&u));
        }
    }
}
