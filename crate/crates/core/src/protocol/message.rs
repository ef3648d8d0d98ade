//! Typed protocol messages and their wire form.
//!
//! Bodies are encoded with bincode, which stores byte strings raw. That keeps
//! the null-scheme MSIN literally visible in a cleartext message, which is
//! exactly what a sniffer would see.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto_suite::{protect, AlgorithmId, ProtectionEnvelope, ProtectionState, SecurityCapabilities};
use crate::identity::{Guti, Plmn, Suci};
use crate::pki::{verify_signed, Certificate, NetworkSigner, TrustStore};

/// Radio-level identity of a simulated endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AccessType {
    #[serde(rename = "3gpp")]
    ThreeGpp,
    #[serde(rename = "non-3gpp")]
    NonThreeGpp,
}

impl AccessType {
    /// Bearer id used as protection-stream input; one per NAS connection.
    pub fn bearer(self) -> u8 {
        match self {
            AccessType::ThreeGpp => 1,
            AccessType::NonThreeGpp => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AccessType::ThreeGpp => "3gpp",
            AccessType::NonThreeGpp => "non-3gpp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    RegistrationRequest,
    IdentityRequest,
    IdentityResponse,
    AuthChallenge,
    AuthResponse,
    AuthResult,
    SecurityModeCommand,
    SecurityModeComplete,
    RegistrationAccept,
    RegistrationReject,
    TauRequest,
    TauReject,
    EmergencyRequest,
    DowngradeCommand,
    Broadcast,
    HandoverCommand,
}

impl MessageKind {
    pub const ALL: [MessageKind; 16] = [
        MessageKind::RegistrationRequest,
        MessageKind::IdentityRequest,
        MessageKind::IdentityResponse,
        MessageKind::AuthChallenge,
        MessageKind::AuthResponse,
        MessageKind::AuthResult,
        MessageKind::SecurityModeCommand,
        MessageKind::SecurityModeComplete,
        MessageKind::RegistrationAccept,
        MessageKind::RegistrationReject,
        MessageKind::TauRequest,
        MessageKind::TauReject,
        MessageKind::EmergencyRequest,
        MessageKind::DowngradeCommand,
        MessageKind::Broadcast,
        MessageKind::HandoverCommand,
    ];

    /// Broadcast system information and handover commands are radio
    /// (RRC) signaling; everything else is NAS.
    pub fn is_nas(self) -> bool {
        !matches!(self, MessageKind::Broadcast | MessageKind::HandoverCommand)
    }

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::RegistrationRequest => "RegistrationRequest",
            MessageKind::IdentityRequest => "IdentityRequest",
            MessageKind::IdentityResponse => "IdentityResponse",
            MessageKind::AuthChallenge => "AuthChallenge",
            MessageKind::AuthResponse => "AuthResponse",
            MessageKind::AuthResult => "AuthResult",
            MessageKind::SecurityModeCommand => "SecurityModeCommand",
            MessageKind::SecurityModeComplete => "SecurityModeComplete",
            MessageKind::RegistrationAccept => "RegistrationAccept",
            MessageKind::RegistrationReject => "RegistrationReject",
            MessageKind::TauRequest => "TauRequest",
            MessageKind::TauReject => "TauReject",
            MessageKind::EmergencyRequest => "EmergencyRequest",
            MessageKind::DowngradeCommand => "DowngradeCommand",
            MessageKind::Broadcast => "Broadcast",
            MessageKind::HandoverCommand => "HandoverCommand",
        }
    }
}

impl std::fmt::Display for MessageKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MessageKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MessageKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown message kind {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectCause {
    /// Bars the UE from the PLMN for the rest of the run.
    Permanent,
    Temporary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuthMethod {
    #[serde(rename = "5g-aka")]
    FiveGAka,
    #[serde(rename = "eap-aka-prime")]
    EapAkaPrime,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MobileIdentity {
    Suci(Suci),
    Guti(Guti),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuthAnswer {
    Res([u8; 16]),
    MacFailure,
    SyncFailure { usim_counter: u64, mac: [u8; 8] },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellInfo {
    pub plmn: Plmn,
    pub cell_id: u32,
    pub priority: u32,
    pub unauthenticated_emergency: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Body {
    RegistrationRequest { identity: MobileIdentity, capabilities: SecurityCapabilities, auth_method: AuthMethod },
    IdentityRequest,
    IdentityResponse { suci: Suci },
    AuthChallenge { nonce: [u8; 16], run_counter: u64, autn: [u8; 8] },
    AuthResponse(AuthAnswer),
    AuthResult { success: bool },
    SecurityModeCommand { cipher: AlgorithmId, integrity: AlgorithmId, replayed_caps: Option<SecurityCapabilities> },
    SecurityModeComplete,
    RegistrationAccept { guti: Option<Guti>, emergency: bool },
    RegistrationReject { cause: RejectCause },
    TauRequest { guti: Guti, capabilities: SecurityCapabilities },
    TauReject { cause: RejectCause },
    EmergencyRequest { identity: Option<MobileIdentity>, capabilities: SecurityCapabilities },
    DowngradeCommand { legacy_network: String },
    Broadcast { cell: CellInfo },
    /// `exposed_key` carries the unchanged `K_gNB` when the operator runs
    /// handovers without key separation.
    HandoverCommand { target_cell: u32, ncc: u32, exposed_key: Option<Vec<u8>> },
}

impl Body {
    pub fn kind(&self) -> MessageKind {
        match self {
            Body::RegistrationRequest { .. } => MessageKind::RegistrationRequest,
            Body::IdentityRequest => MessageKind::IdentityRequest,
            Body::IdentityResponse { .. } => MessageKind::IdentityResponse,
            Body::AuthChallenge { .. } => MessageKind::AuthChallenge,
            Body::AuthResponse(_) => MessageKind::AuthResponse,
            Body::AuthResult { .. } => MessageKind::AuthResult,
            Body::SecurityModeCommand { .. } => MessageKind::SecurityModeCommand,
            Body::SecurityModeComplete => MessageKind::SecurityModeComplete,
            Body::RegistrationAccept { .. } => MessageKind::RegistrationAccept,
            Body::RegistrationReject { .. } => MessageKind::RegistrationReject,
            Body::TauRequest { .. } => MessageKind::TauRequest,
            Body::TauReject { .. } => MessageKind::TauReject,
            Body::EmergencyRequest { .. } => MessageKind::EmergencyRequest,
            Body::DowngradeCommand { .. } => MessageKind::DowngradeCommand,
            Body::Broadcast { .. } => MessageKind::Broadcast,
            Body::HandoverCommand { .. } => MessageKind::HandoverCommand,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        bincode::serialize(self).expect("bodies always serialize")
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        bincode::deserialize(bytes).map_err(|e| WireError(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("wire decode: {0}")]
pub struct WireError(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Payload {
    Clear(Body),
    Protected(ProtectionEnvelope),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreauthSignature {
    pub chain: Vec<Certificate>,
    pub signature: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolMessage {
    pub kind: MessageKind,
    pub sender_claimed_plmn: Plmn,
    pub access: AccessType,
    /// Cleartext outer identity for protected initial messages.
    pub guti_hint: Option<Guti>,
    pub payload: Payload,
    pub signature: Option<PreauthSignature>,
}

impl ProtocolMessage {
    pub fn clear(body: Body, plmn: Plmn, access: AccessType) -> Self {
        Self {
            kind: body.kind(),
            sender_claimed_plmn: plmn,
            access,
            guti_hint: None,
            payload: Payload::Clear(body),
            signature: None,
        }
    }

    pub fn protected(body: &Body, plmn: Plmn, access: AccessType, state: &mut ProtectionState) -> Self {
        Self {
            kind: body.kind(),
            sender_claimed_plmn: plmn,
            access,
            guti_hint: None,
            payload: Payload::Protected(protect(&body.encode(), state)),
            signature: None,
        }
    }

    pub fn with_guti_hint(mut self, guti: Guti) -> Self {
        self.guti_hint = Some(guti);
        self
    }

    /// Attaches a pre-authentication signature over [`Self::signing_bytes`].
    pub fn signed_by(mut self, signer: &NetworkSigner) -> Self {
        let sig = signer.sign(&self.signing_bytes());
        self.signature = Some(PreauthSignature { chain: signer.chain.clone(), signature: sig });
        self
    }

    pub fn signing_bytes(&self) -> Vec<u8> {
        bincode::serialize(&(self.kind, &self.sender_claimed_plmn, self.access, &self.guti_hint, &self.payload))
            .expect("messages always serialize")
    }

    pub fn is_clear(&self) -> bool {
        matches!(self.payload, Payload::Clear(_))
    }

    pub fn envelope(&self) -> Option<&ProtectionEnvelope> {
        match &self.payload {
            Payload::Protected(e) => Some(e),
            Payload::Clear(_) => None,
        }
    }

    /// `CLEAR` or `NEAx/NIAx`.
    pub fn protection_label(&self) -> String {
        match &self.payload {
            Payload::Clear(_) => "CLEAR".to_string(),
            Payload::Protected(e) => format!("{}/{}", e.cipher_alg, e.integrity_alg),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        bincode::serialize(self).expect("messages always serialize")
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        bincode::deserialize(bytes).map_err(|e| WireError(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignatureVerdict {
    Verified,
    /// CA mode is off; the baseline implicit-trust behavior applies.
    Unverifiable,
    Invalid,
}

/// Gate for messages received before a security context exists. With no
/// trust store (CA mode off) nothing can be checked.
pub fn verify_preauth_signature(msg: &ProtocolMessage, trust_store: Option<&TrustStore>) -> SignatureVerdict {
    let Some(store) = trust_store else {
        return SignatureVerdict::Unverifiable;
    };
    let Some(sig) = &msg.signature else {
        return SignatureVerdict::Invalid;
    };
    match verify_signed(&sig.chain, &sig.signature, &msg.signing_bytes(), store, msg.sender_claimed_plmn) {
        Ok(()) => SignatureVerdict::Verified,
        Err(_) => SignatureVerdict::Invalid,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pki::CertificateAuthority;

    fn plmn() -> Plmn {
        "001-01".parse().unwrap()
    }

    #[test]
    fn null_suci_bytes_visible_on_wire() {
        let suci = Suci {
            plmn: plmn(),
            scheme: crate::identity::SuciScheme::Null,
            ciphertext: b"0000000001".to_vec(),
            ephemeral_tag: None,
        };
        let msg = ProtocolMessage::clear(
            Body::RegistrationRequest {
                identity: MobileIdentity::Suci(suci),
                capabilities: SecurityCapabilities::standard(true),
                auth_method: AuthMethod::FiveGAka,
            },
            plmn(),
            AccessType::ThreeGpp,
        );
        let wire = msg.encode();
        assert!(wire.windows(10).any(|w| w == b"0000000001"));
        assert_eq!(ProtocolMessage::decode(&wire).unwrap(), msg);
    }

    #[test]
    fn signature_gate() {
        let ca = CertificateAuthority::from_seed("ca", [1; 32]);
        let store = TrustStore::with_anchor(ca.anchor());
        let signer = NetworkSigner::certified(&ca, "home", plmn(), [2; 32]);
        let reject = ProtocolMessage::clear(
            Body::RegistrationReject { cause: RejectCause::Permanent },
            plmn(),
            AccessType::ThreeGpp,
        );
        assert_eq!(verify_preauth_signature(&reject, None), SignatureVerdict::Unverifiable);
        assert_eq!(verify_preauth_signature(&reject, Some(&store)), SignatureVerdict::Invalid);
        let signed = reject.clone().signed_by(&signer);
        assert_eq!(verify_preauth_signature(&signed, Some(&store)), SignatureVerdict::Verified);

        let mut tampered = signed.clone();
        tampered.payload = Payload::Clear(Body::RegistrationReject { cause: RejectCause::Temporary });
        assert_eq!(verify_preauth_signature(&tampered, Some(&store)), SignatureVerdict::Invalid);
    }

    #[test]
    fn kind_names_parse() {
        for k in MessageKind::ALL {
            assert_eq!(k.name().parse::<MessageKind>().unwrap(), k);
        }
    }
}
