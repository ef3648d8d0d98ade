//! Per-connection security contexts.
//!
//! A connection is one (peer, access type) pair. Contexts start `Partial`
//! (AKA done, `K_AUSF` known, no algorithms yet) and turn `Active` once the
//! security mode procedure completes. Two connections to the same serving
//! network share one NAS key set but keep separate counters; connections to
//! different serving networks share nothing.

use serde::{Deserialize, Serialize};

use crate::crypto_suite::{AlgorithmId, Direction, ProtectionKeys, ProtectionState};
use crate::identity::Plmn;
use crate::keys::{AsKeys, DerivationContext, Key128, Key256, KeyHierarchy};

use super::message::{AccessType, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConnectionId {
    pub peer: NodeId,
    pub access: AccessType,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextState {
    Absent,
    Partial,
    Active,
}

impl ContextState {
    pub fn label(self) -> &'static str {
        match self {
            ContextState::Absent => "absent",
            ContextState::Partial => "partial",
            ContextState::Active => "active",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecurityContext {
    pub connection: ConnectionId,
    pub state: ContextState,
    pub serving_network: Plmn,
    pub run_counter: u64,
    pub k_ausf: Option<Key256>,
    pub hierarchy: Option<KeyHierarchy>,
    /// NAS scope: keys, selected algorithms and this connection's counters.
    pub nas: Option<ProtectionState>,
    /// AS scope; replaced on secure handover.
    pub as_keys: Option<AsKeys>,
    pub serving_cell: u32,
    pub handover_ncc: u32,
    /// Unauthenticated emergency session running on NEA0/NIA0.
    pub emergency: bool,
}

impl SecurityContext {
    pub fn partial(connection: ConnectionId, serving_network: Plmn, run_counter: u64, k_ausf: Key256) -> Self {
        Self {
            connection,
            state: ContextState::Partial,
            serving_network,
            run_counter,
            k_ausf: Some(k_ausf),
            hierarchy: None,
            nas: None,
            as_keys: None,
            serving_cell: 0,
            handover_ncc: 0,
            emergency: false,
        }
    }

    /// Derives the full hierarchy for the selected algorithms. `direction` is
    /// the direction this side transmits in.
    pub fn activated(&self, cipher: AlgorithmId, integrity: AlgorithmId, direction: Direction) -> Self {
        let k_ausf = self.k_ausf.expect("activation needs K_AUSF");
        let hierarchy = KeyHierarchy::from_k_ausf(
            k_ausf,
            DerivationContext { serving_network: self.serving_network, run_counter: self.run_counter, cipher, integrity },
        );
        let keys = ProtectionKeys { cipher, integrity, enc_key: hierarchy.nas_enc, int_key: hierarchy.nas_int };
        Self {
            state: ContextState::Active,
            hierarchy: Some(hierarchy),
            nas: Some(ProtectionState::new(keys, self.connection.access.bearer(), direction)),
            as_keys: Some(hierarchy.as_keys()),
            ..self.clone()
        }
    }

    /// Same NAS keys on another access of the same serving network, with a
    /// fresh counter stream.
    pub fn sibling(&self, connection: ConnectionId) -> Self {
        let nas = self.nas.as_ref().map(|s| ProtectionState::new(s.keys, connection.access.bearer(), s.tx_direction));
        Self { connection, nas, ..self.clone() }
    }

    /// NEA0/NIA0 context for an unauthenticated emergency session. There are
    /// no keys to speak of.
    pub fn null_emergency(connection: ConnectionId, serving_network: Plmn, direction: Direction) -> Self {
        let keys = ProtectionKeys {
            cipher: AlgorithmId::Nea0,
            integrity: AlgorithmId::Nia0,
            enc_key: Key128([0; 16]),
            int_key: Key128([0; 16]),
        };
        Self {
            connection,
            state: ContextState::Active,
            serving_network,
            run_counter: 0,
            k_ausf: None,
            hierarchy: None,
            nas: Some(ProtectionState::new(keys, connection.access.bearer(), direction)),
            as_keys: None,
            serving_cell: 0,
            handover_ncc: 0,
            emergency: true,
        }
    }

    pub fn is_active(&self) -> bool {
        self.state == ContextState::Active
    }

    /// Every key value this context holds, internal and leaf.
    pub fn key_material(&self) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        if let Some(k) = self.k_ausf {
            out.push(k.0.to_vec());
        }
        if let Some(h) = &self.hierarchy {
            out.extend(h.internal_keys().iter().map(|(_, k)| k.0.to_vec()));
            out.extend(h.leaves().iter().map(|(_, k)| k.0.to_vec()));
        }
        if let Some(a) = &self.as_keys {
            out.push(a.k_gnb.0.to_vec());
            for k in [a.rrc_enc, a.rrc_int, a.up_enc, a.up_int] {
                out.push(k.0.to_vec());
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

/// Result of registering one UE on one or two connections.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextLayout {
    /// UE-side contexts in registration order.
    pub contexts: Vec<SecurityContext>,
}

impl ContextLayout {
    /// Number of key values present in both contexts.
    pub fn shared_key_values(&self, a: usize, b: usize) -> usize {
        let (ka, kb) = (self.contexts[a].key_material(), self.contexts[b].key_material());
        ka.iter().filter(|k| kb.contains(k)).count()
    }

    pub fn nas_keys_equal(&self, a: usize, b: usize) -> bool {
        match (&self.contexts[a].nas, &self.contexts[b].nas) {
            (Some(x), Some(y)) => x.keys == y.keys,
            _ => false,
        }
    }
}
