//! Keyed pseudorandom function used by key derivation, message protection
//! and the SUCI scheme.
//!
//! Every derivation edge is `PRF(key, label, input)`. The default instance is
//! HMAC-SHA-256 over `label || 0x00 || input`.

use hmac::{Hmac, Mac};
use sha2::Sha256;

pub trait KeyedPrf: Send + Sync {
    fn derive(&self, key: &[u8], label: &str, input: &[u8]) -> [u8; 32];
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HmacSha256Prf;

impl KeyedPrf for HmacSha256Prf {
    fn derive(&self, key: &[u8], label: &str, input: &[u8]) -> [u8; 32] {
        let mut mac =
            Hmac::<Sha256>::new_from_slice(key).expect("HMAC accepts keys of any length");
        mac.update(label.as_bytes());
        mac.update(&[0u8]);
        mac.update(input);
        mac.finalize().into_bytes().into()
    }
}

/// The PRF instance used unless a caller plugs in another.
pub const DEFAULT_PRF: HmacSha256Prf = HmacSha256Prf;

/// Shorthand for `DEFAULT_PRF.derive`.
pub fn prf(key: &[u8], label: &str, input: &[u8]) -> [u8; 32] {
    DEFAULT_PRF.derive(key, label, input)
}

/// Expands `PRF(key, label, input || counter)` blocks into `len` bytes.
pub fn keystream(key: &[u8], label: &str, input: &[u8], len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(len + 32);
    let mut block = 0u32;
    let mut buf = input.to_vec();
    while out.len() < len {
        buf.truncate(input.len());
        buf.extend_from_slice(&block.to_be_bytes());
        out.extend_from_slice(&prf(key, label, &buf));
        block += 1;
    }
    out.truncate(len);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_separate_outputs() {
        let k = [7u8; 32];
        assert_ne!(prf(&k, "a", b"x"), prf(&k, "b", b"x"));
        assert_ne!(prf(&k, "a", b"x"), prf(&k, "a", b"y"));
        assert_eq!(prf(&k, "a", b"x"), prf(&k, "a", b"x"));
    }

    #[test]
    fn label_and_input_do_not_alias() {
        // "ab" + [0] + "" must differ from "a" + [0] + "b"
        let k = [1u8; 32];
        assert_ne!(prf(&k, "ab", b""), prf(&k, "a", b"b"));
    }

    #[test]
    fn keystream_prefix_stable() {
        let k = [3u8; 16];
        let long = keystream(&k, "s", b"iv", 100);
        let short = keystream(&k, "s", b"iv", 40);
        assert_eq!(&long[..40], &short[..]);
        assert_eq!(long.len(), 100);
    }
}
