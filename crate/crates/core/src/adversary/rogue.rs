//! Rogue base station and in-transit mutation.
//!
//! The rogue broadcasts a valid MCC-MNC of its choosing and answers UE
//! signaling according to the scripted attack. With no attack-specific
//! answer it tries to push through AKA with forged challenges and a forged
//! security mode command, which the UE must refuse.

use std::collections::BTreeSet;

use rand::RngCore;
use rand_chacha::ChaCha20Rng;

use crate::crypto_suite::{AlgorithmId, Direction, ProtectionKeys, ProtectionState};
use crate::identity::Plmn;
use crate::keys::Key128;
use crate::pki::{CertificateAuthority, NetworkSigner};
use crate::protocol::{
    AccessType, AuthAnswer, Body, CellInfo, MessageKind, MobileIdentity, NodeId, Payload, ProtocolMessage,
    RejectCause,
};

use super::{AttackKind, AttackerCapabilities};

/// Name the rogue claims in legacy-network redirects.
pub const LEGACY_NETWORK: &str = "legacy-gsm";

#[derive(Debug, Clone)]
pub struct Attacker {
    pub node: NodeId,
    pub caps: AttackerCapabilities,
    pub kind: Option<AttackKind>,
    pub cell: CellInfo,
    /// Self-issued certificate; never chains to a real trust anchor.
    signer: NetworkSigner,
    rng: ChaCha20Rng,
    forged_smc_sent: BTreeSet<NodeId>,
    /// Flip one payload bit of every protected message in transit.
    pub tamper_protected: bool,
    /// Kinds silently dropped in transit.
    pub drop_kinds: BTreeSet<MessageKind>,
}

impl Attacker {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        node: NodeId,
        caps: AttackerCapabilities,
        kind: Option<AttackKind>,
        lure_plmn: Plmn,
        priority: u32,
        cell_id: u32,
        seed: [u8; 32],
        rng: ChaCha20Rng,
    ) -> Self {
        let ca = CertificateAuthority::from_seed("rogue-ca", seed);
        let signer = NetworkSigner::certified(&ca, "rogue", lure_plmn, seed);
        Self {
            node,
            caps,
            kind,
            cell: CellInfo { plmn: lure_plmn, cell_id, priority, unauthenticated_emergency: true },
            signer,
            rng,
            forged_smc_sent: BTreeSet::new(),
            tamper_protected: false,
            drop_kinds: BTreeSet::new(),
        }
    }

    fn clear(&self, body: Body, access: AccessType) -> ProtocolMessage {
        ProtocolMessage::clear(body, self.cell.plmn, access).signed_by(&self.signer)
    }

    pub fn broadcast(&self) -> ProtocolMessage {
        self.clear(Body::Broadcast { cell: self.cell }, AccessType::ThreeGpp)
    }

    pub fn reject(&self, access: AccessType) -> ProtocolMessage {
        self.clear(Body::RegistrationReject { cause: RejectCause::Permanent }, access)
    }

    fn forged_challenge(&mut self, access: AccessType) -> ProtocolMessage {
        let mut nonce = [0u8; 16];
        let mut autn = [0u8; 8];
        self.rng.fill_bytes(&mut nonce);
        self.rng.fill_bytes(&mut autn);
        let run_counter = u64::from(self.rng.next_u32()) + 1_000_000;
        self.clear(Body::AuthChallenge { nonce, run_counter, autn }, access)
    }

    /// Security mode command under keys the rogue made up.
    fn forged_smc(&mut self, access: AccessType) -> ProtocolMessage {
        let mut enc = [0u8; 16];
        let mut int = [0u8; 16];
        self.rng.fill_bytes(&mut enc);
        self.rng.fill_bytes(&mut int);
        let keys = ProtectionKeys {
            cipher: AlgorithmId::Nea2,
            integrity: AlgorithmId::Nia2,
            enc_key: Key128(enc),
            int_key: Key128(int),
        };
        let mut state = ProtectionState::new(keys, access.bearer(), Direction::Downlink);
        let body = Body::SecurityModeCommand { cipher: keys.cipher, integrity: keys.integrity, replayed_caps: None };
        ProtocolMessage::protected(&body, self.cell.plmn, access, &mut state)
    }

    /// Answers a message a UE sent to the rogue cell.
    pub fn on_receive(&mut self, from: NodeId, msg: &ProtocolMessage) -> Vec<ProtocolMessage> {
        if !self.caps.can_inject_preauth {
            return Vec::new();
        }
        let access = msg.access;
        let Payload::Clear(body) = &msg.payload else {
            return Vec::new();
        };
        match body {
            Body::RegistrationRequest { .. } | Body::TauRequest { .. } | Body::EmergencyRequest { .. } => {
                let guti_only = matches!(
                    body,
                    Body::TauRequest { .. }
                        | Body::RegistrationRequest { identity: MobileIdentity::Guti(_), .. }
                        | Body::EmergencyRequest { identity: Some(MobileIdentity::Guti(_)), .. }
                );
                match self.kind {
                    // claims the GUTI is unknown to force the identity re-request
                    Some(AttackKind::SupiCatchActive) if guti_only => vec![self.clear(Body::IdentityRequest, access)],
                    Some(AttackKind::SupiCatchActive) => vec![self.forged_challenge(access)],
                    Some(AttackKind::PreauthDosReject) => {
                        let cause = RejectCause::Permanent;
                        let body = if msg.kind == MessageKind::TauRequest {
                            Body::TauReject { cause }
                        } else {
                            Body::RegistrationReject { cause }
                        };
                        vec![self.clear(body, access)]
                    }
                    Some(AttackKind::SilentDowngrade) => {
                        vec![self.clear(Body::DowngradeCommand { legacy_network: LEGACY_NETWORK.into() }, access)]
                    }
                    _ => vec![self.forged_challenge(access)],
                }
            }
            Body::IdentityResponse { .. } => vec![self.forged_challenge(access)],
            Body::AuthResponse(AuthAnswer::Res(_)) | Body::AuthResponse(AuthAnswer::MacFailure) => {
                if self.forged_smc_sent.insert(from) {
                    vec![self.forged_smc(access)]
                } else {
                    Vec::new()
                }
            }
            _ => Vec::new(),
        }
    }

    /// In-transit rewrite of a message between legitimate parties.
    pub fn mutate(&mut self, msg: &ProtocolMessage) -> Option<ProtocolMessage> {
        if !self.caps.can_mutate_in_transit {
            return None;
        }
        if self.tamper_protected {
            if let Payload::Protected(env) = &msg.payload {
                let mut env = env.clone();
                if env.payload.is_empty() {
                    return None;
                }
                let bit = (self.rng.next_u32() as usize) % (env.payload.len() * 8);
                env.payload[bit / 8] ^= 1 << (bit % 8);
                return Some(ProtocolMessage { payload: Payload::Protected(env), ..msg.clone() });
            }
        }
        if self.kind != Some(AttackKind::BiddingDown) {
            return None;
        }
        // strip every ciphering capability but the null one
        match &msg.payload {
            Payload::Clear(Body::RegistrationRequest { identity, capabilities, auth_method }) => {
                let mut stripped = capabilities.clone();
                stripped.ciphering = vec![AlgorithmId::Nea0];
                if &stripped == capabilities {
                    return None;
                }
                let body = Body::RegistrationRequest {
                    identity: identity.clone(),
                    capabilities: stripped,
                    auth_method: *auth_method,
                };
                Some(ProtocolMessage { payload: Payload::Clear(body), ..msg.clone() })
            }
            _ => None,
        }
    }
}
