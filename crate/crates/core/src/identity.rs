//! Subscriber identifiers and SUPI concealment.
//!
//! A [`Supi`] is the permanent IMSI-style identity. Over the air it travels
//! as a [`Suci`], produced by one of two schemes:
//!
//! - the **null scheme**, which copies the MSIN digits verbatim, and
//! - the **probabilistic public-key scheme**, an ephemeral X25519 agreement
//!   with the home network key followed by keyed masking and a truncated tag.
//!
//! The null scheme is the mandated fallback when the USIM holds no home
//! network public key, so [`conceal_supi`] never fails. The public-key scheme
//! is a model of the concealment contract (fresh randomness per call, only
//! the home network private key opens it, tampering is detected), not a
//! bit-exact ECIES profile.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use x25519_dalek::{PublicKey, StaticSecret};

use crate::prf::{keystream, prf};

pub const MSIN_LEN: usize = 10;
const SUCI_TAG_LEN: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdentityError {
    #[error("malformed PLMN id {0:?}: expected MCC-MNC with 3 and 2-3 digits")]
    MalformedPlmn(String),
    #[error("malformed SUPI {0:?}: expected MCC-MNC-MSIN with a 10-digit MSIN")]
    MalformedSupi(String),
    #[error("home network private key required to deconceal a probabilistic SUCI")]
    MissingPrivateKey,
    #[error("SUCI ciphertext failed verification")]
    MalformedCiphertext,
    #[error("unknown GUTI policy {0:?}")]
    UnknownGutiPolicy(String),
}

/// Mobile country code plus mobile network code.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Plmn {
    mcc: [u8; 3],
    mnc: [u8; 3],
    mnc_len: u8,
}

impl Plmn {
    pub fn new(mcc: &str, mnc: &str) -> Result<Self, IdentityError> {
        let bad = || IdentityError::MalformedPlmn(format!("{mcc}-{mnc}"));
        if mcc.len() != 3 || !(2..=3).contains(&mnc.len()) {
            return Err(bad());
        }
        if !mcc.bytes().chain(mnc.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let mut m = [0u8; 3];
        m.copy_from_slice(mcc.as_bytes());
        let mut n = [b'0'; 3];
        n[..mnc.len()].copy_from_slice(mnc.as_bytes());
        Ok(Self { mcc: m, mnc: n, mnc_len: mnc.len() as u8 })
    }

    pub fn mcc(&self) -> &str {
        std::str::from_utf8(&self.mcc).expect("ascii digits")
    }

    pub fn mnc(&self) -> &str {
        std::str::from_utf8(&self.mnc[..self.mnc_len as usize]).expect("ascii digits")
    }

    /// Serving network name used as key-derivation input.
    pub fn serving_network_name(&self) -> String {
        format!("5G:mnc{:0>3}.mcc{}.3gppnetwork.org", self.mnc(), self.mcc())
    }
}

impl fmt::Display for Plmn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.mcc(), self.mnc())
    }
}

impl fmt::Debug for Plmn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Plmn({self})")
    }
}

impl FromStr for Plmn {
    type Err = IdentityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (mcc, mnc) = s
            .split_once('-')
            .ok_or_else(|| IdentityError::MalformedPlmn(s.to_string()))?;
        Plmn::new(mcc, mnc).map_err(|_| IdentityError::MalformedPlmn(s.to_string()))
    }
}

impl TryFrom<String> for Plmn {
    type Error = IdentityError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Plmn> for String {
    fn from(p: Plmn) -> String {
        p.to_string()
    }
}

/// Subscription permanent identifier, rendered `MCC-MNC-MSIN`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Supi {
    plmn: Plmn,
    msin: [u8; MSIN_LEN],
}

impl Supi {
    pub fn new(plmn: Plmn, msin: &str) -> Result<Self, IdentityError> {
        if msin.len() != MSIN_LEN || !msin.bytes().all(|b| b.is_ascii_digit()) {
            return Err(IdentityError::MalformedSupi(format!("{plmn}-{msin}")));
        }
        let mut m = [0u8; MSIN_LEN];
        m.copy_from_slice(msin.as_bytes());
        Ok(Self { plmn, msin: m })
    }

    pub fn plmn(&self) -> Plmn {
        self.plmn
    }

    pub fn msin(&self) -> &str {
        std::str::from_utf8(&self.msin).expect("ascii digits")
    }

    pub fn msin_bytes(&self) -> &[u8; MSIN_LEN] {
        &self.msin
    }
}

impl fmt::Display for Supi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.plmn, self.msin())
    }
}

impl fmt::Debug for Supi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Supi({self})")
    }
}

impl FromStr for Supi {
    type Err = IdentityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || IdentityError::MalformedSupi(s.to_string());
        let mut parts = s.splitn(3, '-');
        let (mcc, mnc, msin) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => return Err(bad()),
        };
        let plmn = Plmn::new(mcc, mnc).map_err(|_| bad())?;
        Supi::new(plmn, msin).map_err(|_| bad())
    }
}

impl TryFrom<String> for Supi {
    type Error = IdentityError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Supi> for String {
    fn from(s: Supi) -> String {
        s.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SuciScheme {
    #[serde(rename = "null")]
    Null,
    #[serde(rename = "probabilistic-pk")]
    ProbabilisticPk,
}

impl fmt::Display for SuciScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SuciScheme::Null => "null",
            SuciScheme::ProbabilisticPk => "probabilistic-pk",
        })
    }
}

/// Subscription concealed identifier. MCC and MNC are always cleartext so
/// any network can route the request home.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suci {
    pub plmn: Plmn,
    pub scheme: SuciScheme,
    /// MSIN digits under the null scheme; masked MSIN followed by the tag
    /// otherwise.
    pub ciphertext: Vec<u8>,
    /// Ephemeral public key, present only for the public-key scheme.
    pub ephemeral_tag: Option<Vec<u8>>,
}

impl fmt::Display for Suci {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.scheme {
            SuciScheme::Null => write!(
                f,
                "suci-{}-null-{}",
                self.plmn,
                String::from_utf8_lossy(&self.ciphertext)
            ),
            SuciScheme::ProbabilisticPk => {
                write!(f, "suci-{}-pk-{}", self.plmn, hex::encode(&self.ciphertext))
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HnPublicKey(pub [u8; 32]);

impl fmt::Debug for HnPublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HnPublicKey({})", hex::encode(&self.0[..6]))
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct HnPrivateKey([u8; 32]);

impl fmt::Debug for HnPrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("HnPrivateKey(..)")
    }
}

/// Home network concealment key pair.
#[derive(Debug, Clone)]
pub struct HnKeyPair {
    pub public: HnPublicKey,
    pub private: HnPrivateKey,
}

impl HnKeyPair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut sk = [0u8; 32];
        rng.fill_bytes(&mut sk);
        let secret = StaticSecret::from(sk);
        let public = PublicKey::from(&secret);
        Self { public: HnPublicKey(public.to_bytes()), private: HnPrivateKey(secret.to_bytes()) }
    }
}

/// Key material as seen by one party.
///
/// The USIM view carries the home network public key (when provisioned) and
/// the set of networks it holds keys for; the home network view additionally
/// carries the private key.
#[derive(Debug, Clone, Default)]
pub struct HnKeyMaterial {
    pub public_key: Option<HnPublicKey>,
    pub private_key: Option<HnPrivateKey>,
    pub provisioned_networks: BTreeSet<Plmn>,
}

impl HnKeyMaterial {
    pub fn usim(public_key: Option<HnPublicKey>, provisioned: impl IntoIterator<Item = Plmn>) -> Self {
        Self { public_key, private_key: None, provisioned_networks: provisioned.into_iter().collect() }
    }

    pub fn home(pair: &HnKeyPair) -> Self {
        Self {
            public_key: Some(pair.public),
            private_key: Some(pair.private.clone()),
            provisioned_networks: BTreeSet::new(),
        }
    }

    pub fn without_public_key(&self) -> Self {
        Self { public_key: None, ..self.clone() }
    }
}

struct SchemeKeys {
    enc: [u8; 32],
    mac: [u8; 32],
}

fn scheme_keys(shared: &[u8; 32], eph_pub: &[u8]) -> SchemeKeys {
    SchemeKeys { enc: prf(shared, "suci-enc", eph_pub), mac: prf(shared, "suci-mac", eph_pub) }
}

fn suci_tag(mac_key: &[u8; 32], plmn: &Plmn, eph_pub: &[u8], masked: &[u8]) -> [u8; SUCI_TAG_LEN] {
    let mut input = plmn.to_string().into_bytes();
    input.extend_from_slice(eph_pub);
    input.extend_from_slice(masked);
    let full = prf(mac_key, "suci-tag", &input);
    let mut tag = [0u8; SUCI_TAG_LEN];
    tag.copy_from_slice(&full[..SUCI_TAG_LEN]);
    tag
}

/// Conceals a SUPI. Uses the public-key scheme when `keys.public_key` is
/// present and the null scheme otherwise.
pub fn conceal_supi<R: RngCore + CryptoRng>(supi: &Supi, keys: &HnKeyMaterial, rng: &mut R) -> Suci {
    let Some(hn_pub) = keys.public_key else {
        return Suci {
            plmn: supi.plmn,
            scheme: SuciScheme::Null,
            ciphertext: supi.msin.to_vec(),
            ephemeral_tag: None,
        };
    };
    let mut eph = [0u8; 32];
    rng.fill_bytes(&mut eph);
    let eph_secret = StaticSecret::from(eph);
    let eph_pub = PublicKey::from(&eph_secret).to_bytes();
    let shared = eph_secret.diffie_hellman(&PublicKey::from(hn_pub.0)).to_bytes();
    let sk = scheme_keys(&shared, &eph_pub);
    let stream = keystream(&sk.enc, "suci-stream", &eph_pub, MSIN_LEN);
    let mut ciphertext: Vec<u8> = supi.msin.iter().zip(&stream).map(|(a, b)| a ^ b).collect();
    let tag = suci_tag(&sk.mac, &supi.plmn, &eph_pub, &ciphertext);
    ciphertext.extend_from_slice(&tag);
    Suci {
        plmn: supi.plmn,
        scheme: SuciScheme::ProbabilisticPk,
        ciphertext,
        ephemeral_tag: Some(eph_pub.to_vec()),
    }
}

/// Recovers the SUPI. The null scheme needs no key; the public-key scheme
/// needs the home network private key and rejects any tampering.
pub fn deconceal_supi(suci: &Suci, keys: &HnKeyMaterial) -> Result<Supi, IdentityError> {
    let msin = match suci.scheme {
        SuciScheme::Null => suci.ciphertext.clone(),
        SuciScheme::ProbabilisticPk => {
            let private = keys.private_key.as_ref().ok_or(IdentityError::MissingPrivateKey)?;
            let eph_pub: [u8; 32] = suci
                .ephemeral_tag
                .as_deref()
                .and_then(|t| t.try_into().ok())
                .ok_or(IdentityError::MalformedCiphertext)?;
            if suci.ciphertext.len() != MSIN_LEN + SUCI_TAG_LEN {
                return Err(IdentityError::MalformedCiphertext);
            }
            let secret = StaticSecret::from(private.0);
            let shared = secret.diffie_hellman(&PublicKey::from(eph_pub));
            if !shared.was_contributory() {
                return Err(IdentityError::MalformedCiphertext);
            }
            let sk = scheme_keys(shared.as_bytes(), &eph_pub);
            let (masked, tag) = suci.ciphertext.split_at(MSIN_LEN);
            if suci_tag(&sk.mac, &suci.plmn, &eph_pub, masked) != tag {
                return Err(IdentityError::MalformedCiphertext);
            }
            let stream = keystream(&sk.enc, "suci-stream", &eph_pub, MSIN_LEN);
            masked.iter().zip(&stream).map(|(a, b)| a ^ b).collect()
        }
    };
    let msin = std::str::from_utf8(&msin).map_err(|_| IdentityError::MalformedCiphertext)?;
    Supi::new(suci.plmn, msin).map_err(|_| IdentityError::MalformedCiphertext)
}

/// What a passive observer can read out of SUCI bytes alone, without keys:
/// a 10-digit MSIN when the concealed field is literally digits.
pub fn observe_msin(ciphertext: &[u8]) -> Option<String> {
    (ciphertext.len() == MSIN_LEN && ciphertext.iter().all(u8::is_ascii_digit))
        .then(|| String::from_utf8(ciphertext.to_vec()).expect("ascii digits"))
}

/// 5G globally unique temporary identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Guti {
    pub plmn: Plmn,
    pub temp_id: u32,
    pub epoch: u32,
}

impl fmt::Display for Guti {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "guti-{}-{:08x}/{}", self.plmn, self.temp_id, self.epoch)
    }
}

/// When the network hands out a fresh 5G-GUTI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum GutiPolicy {
    Never,
    EveryRegistration,
    /// Reassign once this many registrations have used the current GUTI.
    EveryNEvents(u32),
}

impl GutiPolicy {
    pub fn due(&self, events_since_assignment: u32) -> bool {
        match *self {
            GutiPolicy::Never => false,
            GutiPolicy::EveryRegistration => true,
            GutiPolicy::EveryNEvents(n) => events_since_assignment >= n.max(1),
        }
    }
}

impl fmt::Display for GutiPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GutiPolicy::Never => f.write_str("never"),
            GutiPolicy::EveryRegistration => f.write_str("every-registration"),
            GutiPolicy::EveryNEvents(n) => write!(f, "every-{n}-events"),
        }
    }
}

impl FromStr for GutiPolicy {
    type Err = IdentityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "never" => Ok(GutiPolicy::Never),
            "every-registration" => Ok(GutiPolicy::EveryRegistration),
            _ => s
                .strip_prefix("every-")
                .and_then(|r| r.strip_suffix("-events"))
                .and_then(|n| n.parse::<u32>().ok())
                .filter(|n| *n > 0)
                .map(GutiPolicy::EveryNEvents)
                .ok_or_else(|| IdentityError::UnknownGutiPolicy(s.to_string())),
        }
    }
}

impl TryFrom<String> for GutiPolicy {
    type Error = IdentityError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<GutiPolicy> for String {
    fn from(p: GutiPolicy) -> String {
        p.to_string()
    }
}

/// First GUTI for a subscriber in `plmn`.
pub fn allocate_guti<R: RngCore>(plmn: Plmn, rng: &mut R) -> Guti {
    Guti { plmn, temp_id: rng.next_u32(), epoch: 0 }
}

/// Applies the reassignment policy after a registration event.
///
/// `events_since_assignment` counts registrations that have used `current`,
/// including the one that triggered this call. When the policy is not due the
/// GUTI is returned unchanged.
pub fn reassign_guti<R: RngCore>(
    current: Guti,
    policy: GutiPolicy,
    events_since_assignment: u32,
    rng: &mut R,
) -> Guti {
    if !policy.due(events_since_assignment) {
        return current;
    }
    let mut temp_id = rng.next_u32();
    while temp_id == current.temp_id {
        temp_id = rng.next_u32();
    }
    Guti { plmn: current.plmn, temp_id, epoch: current.epoch + 1 }
}
