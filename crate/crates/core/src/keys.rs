//! Key hierarchy rooted at the long-term subscriber key `K`.
//!
//! This is a model of the hierarchy, not a bit-exact reproduction of the
//! standardized key derivation functions. Each edge is one application of
//! the keyed PRF with its own label:
//!
//! ```text
//! K ──k-ausf──▶ K_AUSF ──k-seaf──▶ K_SEAF ──k-amf──▶ K_AMF ─┬─nas-enc/nas-int──▶ NAS leaves
//!                                                           └─k-gnb──▶ K_gNB ──rrc-*/up-*──▶ AS leaves
//! ```
//!
//! Internal keys are 256 bits; leaves are truncated to 128 bits.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto_suite::AlgorithmId;
use crate::identity::Plmn;
use crate::prf::{KeyedPrf, DEFAULT_PRF};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KeyError {
    #[error("re-derivation requires an active NAS connection")]
    NoActiveNasConnection,
    #[error("key fixture: {0}")]
    Fixture(String),
}

macro_rules! key_type {
    ($name:ident, $len:expr) => {
        #[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        pub struct $name(pub [u8; $len]);

        impl $name {
            pub fn as_bytes(&self) -> &[u8; $len] {
                &self.0
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }

            pub fn from_hex(s: &str) -> Result<Self, KeyError> {
                let v = hex::decode(s).map_err(|e| KeyError::Fixture(format!("bad hex: {e}")))?;
                let arr: [u8; $len] = v.try_into().map_err(|v: Vec<u8>| {
                    KeyError::Fixture(format!("expected {} bytes, got {}", $len, v.len()))
                })?;
                Ok(Self(arr))
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({}..)", stringify!($name), hex::encode(&self.0[..4]))
            }
        }
    };
}

key_type!(RootKey, 32);
key_type!(Key256, 32);
key_type!(Key128, 16);

impl Key256 {
    fn truncate(&self) -> Key128 {
        let mut k = [0u8; 16];
        k.copy_from_slice(&self.0[..16]);
        Key128(k)
    }
}

/// Inputs that bind a hierarchy to one authentication run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DerivationContext {
    pub serving_network: Plmn,
    pub run_counter: u64,
    pub cipher: AlgorithmId,
    pub integrity: AlgorithmId,
}

/// Access-stratum keys. They change on handover while the NAS keys stay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AsKeys {
    pub k_gnb: Key256,
    pub rrc_enc: Key128,
    pub rrc_int: Key128,
    pub up_enc: Key128,
    pub up_int: Key128,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KeyHierarchy {
    pub k_ausf: Key256,
    pub k_seaf: Key256,
    pub k_amf: Key256,
    pub k_gnb: Key256,
    pub nas_enc: Key128,
    pub nas_int: Key128,
    pub rrc_enc: Key128,
    pub rrc_int: Key128,
    pub up_enc: Key128,
    pub up_int: Key128,
    pub context: DerivationContext,
}

fn edge(prf: &dyn KeyedPrf, key: &[u8], label: &str, input: &[u8]) -> Key256 {
    Key256(prf.derive(key, label, input))
}

/// ARPF/USIM side: the first edge, `K → K_AUSF`. Depends only on the serving
/// network and run counter, which is all that is known at challenge time.
pub fn derive_k_ausf(root: &RootKey, serving_network: &Plmn, run_counter: u64) -> Key256 {
    derive_k_ausf_with(&DEFAULT_PRF, root, serving_network, run_counter)
}

pub fn derive_k_ausf_with(
    prf: &dyn KeyedPrf,
    root: &RootKey,
    serving_network: &Plmn,
    run_counter: u64,
) -> Key256 {
    let mut input = serving_network.serving_network_name().into_bytes();
    input.extend_from_slice(&run_counter.to_be_bytes());
    edge(prf, &root.0, "k-ausf", &input)
}

pub fn derive_as_keys(k_gnb: Key256, cipher: AlgorithmId, integrity: AlgorithmId) -> AsKeys {
    derive_as_keys_with(&DEFAULT_PRF, k_gnb, cipher, integrity)
}

fn derive_as_keys_with(prf: &dyn KeyedPrf, k_gnb: Key256, cipher: AlgorithmId, integrity: AlgorithmId) -> AsKeys {
    let c = [cipher.code()];
    let i = [integrity.code()];
    AsKeys {
        k_gnb,
        rrc_enc: edge(prf, &k_gnb.0, "rrc-enc", &c).truncate(),
        rrc_int: edge(prf, &k_gnb.0, "rrc-int", &i).truncate(),
        up_enc: edge(prf, &k_gnb.0, "up-enc", &c).truncate(),
        up_int: edge(prf, &k_gnb.0, "up-int", &i).truncate(),
    }
}

/// `K_gNB*` for a target cell, as used by a key-separating handover.
pub fn derive_handover_k_gnb(k_gnb: &Key256, target_cell: u32, ncc: u32) -> Key256 {
    let mut input = target_cell.to_be_bytes().to_vec();
    input.extend_from_slice(&ncc.to_be_bytes());
    edge(&DEFAULT_PRF, &k_gnb.0, "k-gnb-star", &input)
}

impl KeyHierarchy {
    /// Everything below `K_AUSF`. The serving network holds `K_AUSF` (via
    /// the home network) but never `K`.
    pub fn from_k_ausf(k_ausf: Key256, context: DerivationContext) -> Self {
        Self::from_k_ausf_with(&DEFAULT_PRF, k_ausf, context)
    }

    pub fn from_k_ausf_with(prf: &dyn KeyedPrf, k_ausf: Key256, context: DerivationContext) -> Self {
        let counter = context.run_counter.to_be_bytes();
        let sn = context.serving_network.serving_network_name();
        let k_seaf = edge(prf, &k_ausf.0, "k-seaf", sn.as_bytes());
        let k_amf = edge(prf, &k_seaf.0, "k-amf", &counter);
        let nas_enc = edge(prf, &k_amf.0, "nas-enc", &[context.cipher.code()]).truncate();
        let nas_int = edge(prf, &k_amf.0, "nas-int", &[context.integrity.code()]).truncate();
        let k_gnb = edge(prf, &k_amf.0, "k-gnb", &counter);
        let as_keys = derive_as_keys_with(prf, k_gnb, context.cipher, context.integrity);
        Self {
            k_ausf,
            k_seaf,
            k_amf,
            k_gnb,
            nas_enc,
            nas_int,
            rrc_enc: as_keys.rrc_enc,
            rrc_int: as_keys.rrc_int,
            up_enc: as_keys.up_enc,
            up_int: as_keys.up_int,
            context,
        }
    }

    pub fn as_keys(&self) -> AsKeys {
        AsKeys {
            k_gnb: self.k_gnb,
            rrc_enc: self.rrc_enc,
            rrc_int: self.rrc_int,
            up_enc: self.up_enc,
            up_int: self.up_int,
        }
    }

    /// Leaf keys with their names, in a fixed order.
    pub fn leaves(&self) -> [(&'static str, Key128); 6] {
        [
            ("nas_enc", self.nas_enc),
            ("nas_int", self.nas_int),
            ("rrc_enc", self.rrc_enc),
            ("rrc_int", self.rrc_int),
            ("up_enc", self.up_enc),
            ("up_int", self.up_int),
        ]
    }

    pub fn internal_keys(&self) -> [(&'static str, Key256); 4] {
        [("k_ausf", self.k_ausf), ("k_seaf", self.k_seaf), ("k_amf", self.k_amf), ("k_gnb", self.k_gnb)]
    }

    /// Flat `name = hex` fixture text.
    pub fn to_fixture(&self, root: &RootKey) -> String {
        let c = &self.context;
        let mut out = String::new();
        out.push_str(&format!("root = {}\n", root.to_hex()));
        out.push_str(&format!("serving_network = {}\n", c.serving_network));
        out.push_str(&format!("run_counter = {}\n", c.run_counter));
        out.push_str(&format!("cipher = {}\n", c.cipher));
        out.push_str(&format!("integrity = {}\n", c.integrity));
        for (name, k) in self.internal_keys() {
            out.push_str(&format!("{name} = {}\n", k.to_hex()));
        }
        for (name, k) in self.leaves() {
            out.push_str(&format!("{name} = {}\n", k.to_hex()));
        }
        out
    }
}

/// A parsed golden fixture: the inputs and the recorded hierarchy.
#[derive(Debug, Clone)]
pub struct KeyFixture {
    pub root: RootKey,
    pub hierarchy: KeyHierarchy,
}

pub fn parse_fixture(text: &str) -> Result<KeyFixture, KeyError> {
    let mut fields = std::collections::BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| KeyError::Fixture(format!("line {}: expected name = value", n + 1)))?;
        fields.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |name: &str| {
        fields.get(name).map(String::as_str).ok_or_else(|| KeyError::Fixture(format!("missing field {name}")))
    };
    let bad = |name: &str| KeyError::Fixture(format!("bad value for {name}"));
    let context = DerivationContext {
        serving_network: get("serving_network")?.parse().map_err(|_| bad("serving_network"))?,
        run_counter: get("run_counter")?.parse().map_err(|_| bad("run_counter"))?,
        cipher: get("cipher")?.parse().map_err(|_| bad("cipher"))?,
        integrity: get("integrity")?.parse().map_err(|_| bad("integrity"))?,
    };
    let k256 = |n: &str| get(n).and_then(Key256::from_hex);
    let k128 = |n: &str| get(n).and_then(Key128::from_hex);
    Ok(KeyFixture {
        root: RootKey::from_hex(get("root")?)?,
        hierarchy: KeyHierarchy {
            k_ausf: k256("k_ausf")?,
            k_seaf: k256("k_seaf")?,
            k_amf: k256("k_amf")?,
            k_gnb: k256("k_gnb")?,
            nas_enc: k128("nas_enc")?,
            nas_int: k128("nas_int")?,
            rrc_enc: k128("rrc_enc")?,
            rrc_int: k128("rrc_int")?,
            up_enc: k128("up_enc")?,
            up_int: k128("up_int")?,
            context,
        },
    })
}

pub fn derive_hierarchy(root: &RootKey, context: DerivationContext) -> KeyHierarchy {
    derive_hierarchy_with(&DEFAULT_PRF, root, context)
}

pub fn derive_hierarchy_with(prf: &dyn KeyedPrf, root: &RootKey, context: DerivationContext) -> KeyHierarchy {
    let k_ausf = derive_k_ausf_with(prf, root, &context.serving_network, context.run_counter);
    KeyHierarchy::from_k_ausf_with(prf, k_ausf, context)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NasConnection {
    Active,
    Inactive,
}

/// Network-initiated re-derivation: the next run counter, fresh leaves.
pub fn rederive_on_demand(
    root: &RootKey,
    current: &KeyHierarchy,
    nas: NasConnection,
) -> Result<KeyHierarchy, KeyError> {
    if nas != NasConnection::Active {
        return Err(KeyError::NoActiveNasConnection);
    }
    let context = DerivationContext { run_counter: current.context.run_counter + 1, ..current.context };
    Ok(derive_hierarchy(root, context))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(counter: u64) -> DerivationContext {
        DerivationContext {
            serving_network: "001-01".parse().unwrap(),
            run_counter: counter,
            cipher: AlgorithmId::Nea2,
            integrity: AlgorithmId::Nia2,
        }
    }

    #[test]
    fn deterministic() {
        let root = RootKey([0x42; 32]);
        assert_eq!(derive_hierarchy(&root, ctx(1)), derive_hierarchy(&root, ctx(1)));
    }

    #[test]
    fn run_counter_changes_every_leaf() {
        let root = RootKey([0x42; 32]);
        let a = derive_hierarchy(&root, ctx(1));
        let b = derive_hierarchy(&root, ctx(2));
        for ((name, x), (_, y)) in a.leaves().into_iter().zip(b.leaves()) {
            assert_ne!(x, y, "{name}");
        }
    }

    #[test]
    fn no_leaf_equals_an_ancestor() {
        let root = RootKey([0u8; 32]);
        let h = derive_hierarchy(&root, ctx(1));
        let mut ancestors: Vec<[u8; 16]> = vec![root.0[..16].try_into().unwrap()];
        ancestors.extend(h.internal_keys().iter().map(|(_, k)| <[u8; 16]>::try_from(&k.0[..16]).unwrap()));
        for (name, leaf) in h.leaves() {
            assert!(!ancestors.contains(&leaf.0), "{name}");
        }
    }

    #[test]
    fn rederive_requires_active_connection() {
        let root = RootKey([1; 32]);
        let h = derive_hierarchy(&root, ctx(1));
        assert_eq!(rederive_on_demand(&root, &h, NasConnection::Inactive), Err(KeyError::NoActiveNasConnection));
        let h2 = rederive_on_demand(&root, &h, NasConnection::Active).unwrap();
        let h3 = rederive_on_demand(&root, &h2, NasConnection::Active).unwrap();
        assert_eq!(h2.context.run_counter, 2);
        assert_eq!(h3.context.run_counter, 3);
        for (a, b) in [(&h, &h2), (&h2, &h3), (&h, &h3)] {
            for ((n, x), (_, y)) in a.leaves().into_iter().zip(b.leaves()) {
                assert_ne!(x, y, "{n}");
            }
        }
    }

    #[test]
    fn fixture_text_roundtrips() {
        let root = RootKey([9; 32]);
        let h = derive_hierarchy(&root, ctx(7));
        let parsed = parse_fixture(&h.to_fixture(&root)).unwrap();
        assert_eq!(parsed.hierarchy, h);
        assert_eq!(parsed.root, root);
    }

    #[test]
    fn fixture_missing_field_named() {
        let err = parse_fixture("root = 00\n").unwrap_err();
        assert!(matches!(err, KeyError::Fixture(m) if m.contains("serving_network")));
    }

    #[test]
    fn handover_key_separates_cells() {
        let h = derive_hierarchy(&RootKey([2; 32]), ctx(1));
        let a = derive_handover_k_gnb(&h.k_gnb, 10, 1);
        let b = derive_handover_k_gnb(&h.k_gnb, 11, 1);
        assert_ne!(a, b);
        assert_ne!(a, h.k_gnb);
    }
}
