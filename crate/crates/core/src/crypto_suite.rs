//! Algorithm registry, message protection and algorithm negotiation.
//!
//! NEA1/NEA2 are modeled as keyed stream masking and NIA1/NIA2 as a keyed
//! 32-bit tag, both built on the crate PRF with per-algorithm labels. NEA0
//! leaves the payload as-is and NIA0 produces no tag; under NIA0 neither
//! tampering nor replay is detected.
//!
//! Replay protection is a single monotone counter per direction with strict
//! greater-than acceptance, no reordering window.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::keys::Key128;
use crate::prf::{keystream, prf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmKind {
    Ciphering,
    Integrity,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AlgorithmId {
    Nea0,
    Nea1,
    Nea2,
    Nia0,
    Nia1,
    Nia2,
}

impl AlgorithmId {
    pub const CIPHERING: [AlgorithmId; 3] = [AlgorithmId::Nea0, AlgorithmId::Nea1, AlgorithmId::Nea2];
    pub const INTEGRITY: [AlgorithmId; 3] = [AlgorithmId::Nia0, AlgorithmId::Nia1, AlgorithmId::Nia2];

    pub fn kind(self) -> AlgorithmKind {
        match self {
            AlgorithmId::Nea0 | AlgorithmId::Nea1 | AlgorithmId::Nea2 => AlgorithmKind::Ciphering,
            _ => AlgorithmKind::Integrity,
        }
    }

    pub fn is_null(self) -> bool {
        matches!(self, AlgorithmId::Nea0 | AlgorithmId::Nia0)
    }

    /// Numeric id within its kind.
    pub fn code(self) -> u8 {
        match self {
            AlgorithmId::Nea0 | AlgorithmId::Nia0 => 0,
            AlgorithmId::Nea1 | AlgorithmId::Nia1 => 1,
            AlgorithmId::Nea2 | AlgorithmId::Nia2 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmId::Nea0 => "NEA0",
            AlgorithmId::Nea1 => "NEA1",
            AlgorithmId::Nea2 => "NEA2",
            AlgorithmId::Nia0 => "NIA0",
            AlgorithmId::Nia1 => "NIA1",
            AlgorithmId::Nia2 => "NIA2",
        }
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Debug for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown algorithm {0:?}")]
pub struct UnknownAlgorithm(pub String);

impl FromStr for AlgorithmId {
    type Err = UnknownAlgorithm;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "NEA0" => AlgorithmId::Nea0,
            "NEA1" => AlgorithmId::Nea1,
            "NEA2" => AlgorithmId::Nea2,
            "NIA0" => AlgorithmId::Nia0,
            "NIA1" => AlgorithmId::Nia1,
            "NIA2" => AlgorithmId::Nia2,
            _ => return Err(UnknownAlgorithm(s.to_string())),
        })
    }
}

impl TryFrom<String> for AlgorithmId {
    type Error = UnknownAlgorithm;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<AlgorithmId> for String {
    fn from(a: AlgorithmId) -> String {
        a.name().to_string()
    }
}

/// Ordered algorithm lists, most preferred first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SecurityCapabilities {
    pub ciphering: Vec<AlgorithmId>,
    pub integrity: Vec<AlgorithmId>,
}

impl SecurityCapabilities {
    /// Standard UE capabilities; the null algorithms are included iff the
    /// operator policy permits null modes.
    pub fn standard(null_allowed: bool) -> Self {
        let mut ciphering = vec![AlgorithmId::Nea2, AlgorithmId::Nea1];
        let mut integrity = vec![AlgorithmId::Nia2, AlgorithmId::Nia1];
        if null_allowed {
            ciphering.push(AlgorithmId::Nea0);
            integrity.push(AlgorithmId::Nia0);
        }
        Self { ciphering, integrity }
    }

    pub fn supports(&self, alg: AlgorithmId) -> bool {
        self.ciphering.contains(&alg) || self.integrity.contains(&alg)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorPolicy {
    pub cipher_preference: Vec<AlgorithmId>,
    pub integrity_preference: Vec<AlgorithmId>,
    pub null_algorithms_allowed: bool,
    /// Echo the received UE capabilities back in the Security Mode Command.
    pub capability_echo: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Negotiated {
    pub cipher: AlgorithmId,
    pub integrity: AlgorithmId,
    /// Capabilities exactly as the network received them.
    pub replayed_caps: SecurityCapabilities,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum NegotiationError {
    #[error("no common {0:?} algorithm")]
    NoCommonAlgorithm(AlgorithmKind),
}

/// Network-side selection: the highest network preference that the UE
/// capabilities (as received) contain.
pub fn negotiate(ue_caps: &SecurityCapabilities, policy: &OperatorPolicy) -> Result<Negotiated, NegotiationError> {
    let pick = |prefs: &[AlgorithmId], offered: &[AlgorithmId], kind| {
        prefs
            .iter()
            .copied()
            .filter(|a| a.kind() == kind)
            .filter(|a| policy.null_algorithms_allowed || !a.is_null())
            .find(|a| offered.contains(a))
            .ok_or(NegotiationError::NoCommonAlgorithm(kind))
    };
    Ok(Negotiated {
        cipher: pick(&policy.cipher_preference, &ue_caps.ciphering, AlgorithmKind::Ciphering)?,
        integrity: pick(&policy.integrity_preference, &ue_caps.integrity, AlgorithmKind::Integrity)?,
        replayed_caps: ue_caps.clone(),
    })
}

/// UE-side bidding-down check: anything other than an exact echo of what the
/// UE sent means the capabilities were altered in transit.
pub fn bidding_down_detected(sent: &SecurityCapabilities, replayed: &SecurityCapabilities) -> bool {
    sent != replayed
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Uplink,
    Downlink,
}

impl Direction {
    fn code(self) -> u8 {
        match self {
            Direction::Uplink => 0,
            Direction::Downlink => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProtectionKeys {
    pub cipher: AlgorithmId,
    pub integrity: AlgorithmId,
    pub enc_key: Key128,
    pub int_key: Key128,
}

/// One direction-aware protection stream: keys, bearer id and counters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProtectionState {
    pub keys: ProtectionKeys,
    pub bearer: u8,
    pub tx_direction: Direction,
    pub tx_count: u32,
    pub rx_last: Option<u32>,
}

impl ProtectionState {
    pub fn new(keys: ProtectionKeys, bearer: u8, tx_direction: Direction) -> Self {
        Self { keys, bearer, tx_direction, tx_count: 0, rx_last: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProtectionEnvelope {
    pub cipher_alg: AlgorithmId,
    pub integrity_alg: AlgorithmId,
    pub bearer: u8,
    pub direction: Direction,
    pub count: u32,
    pub mac: Option<[u8; 4]>,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum UnprotectError {
    #[error("integrity check failed; message must be discarded")]
    IntegrityFailure,
    #[error("replayed counter {count} (last accepted {last})")]
    ReplayDetected { count: u32, last: u32 },
}

fn stream_input(count: u32, bearer: u8, direction: Direction) -> Vec<u8> {
    let mut v = count.to_be_bytes().to_vec();
    v.push(bearer);
    v.push(direction.code());
    v
}

fn mask(keys: &ProtectionKeys, count: u32, bearer: u8, direction: Direction, data: &[u8]) -> Vec<u8> {
    if keys.cipher == AlgorithmId::Nea0 {
        return data.to_vec();
    }
    let label = match keys.cipher {
        AlgorithmId::Nea1 => "nea1-stream",
        _ => "nea2-stream",
    };
    let ks = keystream(&keys.enc_key.0, label, &stream_input(count, bearer, direction), data.len());
    data.iter().zip(ks).map(|(a, b)| a ^ b).collect()
}

fn tag(keys: &ProtectionKeys, env: &ProtectionEnvelope) -> Option<[u8; 4]> {
    let label = match keys.integrity {
        AlgorithmId::Nia0 => return None,
        AlgorithmId::Nia1 => "nia1-mac",
        _ => "nia2-mac",
    };
    let mut input = stream_input(env.count, env.bearer, env.direction);
    input.push(env.cipher_alg.code());
    input.push(env.integrity_alg.code());
    input.extend_from_slice(&env.payload);
    let full = prf(&keys.int_key.0, label, &input);
    Some([full[0], full[1], full[2], full[3]])
}

/// Masks and tags `payload`, consuming one transmit counter value.
pub fn protect(payload: &[u8], state: &mut ProtectionState) -> ProtectionEnvelope {
    let count = state.tx_count;
    state.tx_count = state.tx_count.wrapping_add(1);
    let mut env = ProtectionEnvelope {
        cipher_alg: state.keys.cipher,
        integrity_alg: state.keys.integrity,
        bearer: state.bearer,
        direction: state.tx_direction,
        count,
        mac: None,
        payload: mask(&state.keys, count, state.bearer, state.tx_direction, payload),
    };
    env.mac = tag(&state.keys, &env);
    env
}

/// Verifies and unmasks an envelope. The receive counter only advances on
/// success, so a rejected envelope leaves `state` untouched.
pub fn unprotect(env: &ProtectionEnvelope, state: &mut ProtectionState) -> Result<Vec<u8>, UnprotectError> {
    // The envelope must claim exactly the context's algorithms; rewriting
    // the header to NIA0 is an integrity failure, not a bypass.
    if env.cipher_alg != state.keys.cipher
        || env.integrity_alg != state.keys.integrity
        || env.bearer != state.bearer
        || env.direction == state.tx_direction
    {
        return Err(UnprotectError::IntegrityFailure);
    }
    if state.keys.integrity != AlgorithmId::Nia0 {
        if env.mac.is_none() || env.mac != tag(&state.keys, env) {
            return Err(UnprotectError::IntegrityFailure);
        }
        if let Some(last) = state.rx_last {
            if env.count <= last {
                return Err(UnprotectError::ReplayDetected { count: env.count, last });
            }
        }
        state.rx_last = Some(env.count);
    }
    Ok(mask(&state.keys, env.count, env.bearer, env.direction, &env.payload))
}
