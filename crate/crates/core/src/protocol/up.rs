//! User-plane security policy and DRB protection.

use serde::{Deserialize, Serialize};

use crate::crypto_suite::{
    protect, unprotect, AlgorithmId, Direction, ProtectionEnvelope, ProtectionKeys, ProtectionState, UnprotectError,
};
use crate::keys::AsKeys;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Requirement {
    Required,
    Preferred,
    NotNeeded,
}

impl Requirement {
    /// Preferred is activated whenever the gNB can, which here is always.
    pub fn activates(self) -> bool {
        !matches!(self, Requirement::NotNeeded)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyOrigin {
    HomeSmf,
    LocalSmfOverride,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpSecurityPolicy {
    pub integrity: Requirement,
    pub confidentiality: Requirement,
    pub origin: PolicyOrigin,
}

impl UpSecurityPolicy {
    pub fn home(integrity: Requirement, confidentiality: Requirement) -> Self {
        Self { integrity, confidentiality, origin: PolicyOrigin::HomeSmf }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PduSession {
    pub session_id: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub session_id: u8,
    pub event: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrbConfig {
    pub session_id: u8,
    pub integrity: bool,
    pub ciphering: bool,
    pub policy: UpSecurityPolicy,
}

/// Sets DRB protection exactly per the effective policy. A local SMF
/// override replaces only the confidentiality choice and is audited.
pub fn apply_up_policy(
    session: PduSession,
    home_policy: UpSecurityPolicy,
    local_override: Option<Requirement>,
    audit: &mut Vec<AuditEntry>,
) -> DrbConfig {
    let mut policy = home_policy;
    if let Some(conf) = local_override {
        audit.push(AuditEntry {
            session_id: session.session_id,
            event: format!(
                "local SMF override: confidentiality {:?} -> {:?}",
                home_policy.confidentiality, conf
            ),
        });
        policy.confidentiality = conf;
        policy.origin = PolicyOrigin::LocalSmfOverride;
    }
    DrbConfig {
        session_id: session.session_id,
        integrity: policy.integrity.activates(),
        ciphering: policy.confidentiality.activates(),
        policy,
    }
}

/// One end of a data radio bearer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Drb {
    state: ProtectionState,
}

impl Drb {
    pub fn new(config: &DrbConfig, keys: &AsKeys, direction: Direction) -> Self {
        let keys = ProtectionKeys {
            cipher: if config.ciphering { AlgorithmId::Nea2 } else { AlgorithmId::Nea0 },
            integrity: if config.integrity { AlgorithmId::Nia2 } else { AlgorithmId::Nia0 },
            enc_key: keys.up_enc,
            int_key: keys.up_int,
        };
        Self { state: ProtectionState::new(keys, 0x10 + config.session_id, direction) }
    }

    pub fn send(&mut self, payload: &[u8]) -> ProtectionEnvelope {
        protect(payload, &mut self.state)
    }

    pub fn receive(&mut self, env: &ProtectionEnvelope) -> Result<Vec<u8>, UnprotectError> {
        unprotect(env, &mut self.state)
    }
}
