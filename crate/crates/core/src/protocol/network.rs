//! Serving network state machine (gNB + AMF/SEAF + SMF).
//!
//! The SEAF never sees the root key: it compares a hash of the UE response
//! against the home network's `HXRES` and then asks the home AUSF to confirm,
//! which is what releases `K_AUSF`.

use std::collections::BTreeMap;

use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::crypto_suite::{negotiate, unprotect, Direction, OperatorPolicy, SecurityCapabilities};
use crate::identity::{allocate_guti, reassign_guti, Guti, GutiPolicy, Plmn, SuciScheme, Supi};
use crate::keys::{derive_as_keys, derive_handover_k_gnb};
use crate::pki::NetworkSigner;

use super::context::{ConnectionId, ContextState, SecurityContext};
use super::home::{hres, AuthVector, HomeDirectory, HomeError};
use super::message::{
    AccessType, AuthAnswer, Body, CellInfo, MessageKind, MobileIdentity, NodeId, Payload, ProtocolMessage,
    RejectCause,
};
use super::up::{apply_up_policy, AuditEntry, DrbConfig, PduSession, Requirement, UpSecurityPolicy};
use super::{Address, DeliveryVerdict, NodeEvent, Outgoing, StepOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HandoverSecurity {
    /// Fresh AS keys at the target.
    Secure,
    /// Context material travels unprotected to the target.
    Insecure,
}

#[derive(Debug, Clone)]
pub struct NetworkConfig {
    pub name: String,
    pub plmn: Plmn,
    pub cell: CellInfo,
    pub policy: OperatorPolicy,
    pub unauthenticated_emergency_allowed: bool,
    pub handover_security: HandoverSecurity,
    pub up_policy: UpSecurityPolicy,
    pub local_smf_override: Option<Requirement>,
    pub guti_policy: GutiPolicy,
    /// Present iff CA mode is on.
    pub signer: Option<NetworkSigner>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NetworkTrigger {
    Broadcast,
    ReAuthenticate { ue: NodeId, access: AccessType },
    Handover { ue: NodeId, access: AccessType, target_cell: u32 },
    EstablishPduSession { ue: NodeId, access: AccessType, session_id: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PendingKind {
    Registration,
    Emergency,
    ReAuth,
}

/// SEAF bookkeeping for one authentication in progress.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingAuth {
    pub kind: PendingKind,
    pub supi: Option<Supi>,
    pub caps: SecurityCapabilities,
    pub vector: Option<AuthVector>,
    pub candidate: Option<SecurityContext>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UeRecord {
    pub supi: Option<Supi>,
    pub caps: SecurityCapabilities,
    pub ctx: SecurityContext,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GutiRecord {
    pub guti: Guti,
    pub events: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeafRecord {
    pub pending: BTreeMap<ConnectionId, PendingAuth>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AmfRecord {
    /// Keyed by (UE node, access).
    pub contexts: BTreeMap<ConnectionId, UeRecord>,
    pub gutis: BTreeMap<Supi, GutiRecord>,
    pub by_temp_id: BTreeMap<u32, Supi>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SmfRecord {
    pub sessions: BTreeMap<(ConnectionId, u8), DrbConfig>,
    pub audit: Vec<AuditEntry>,
}

#[derive(Debug, Clone)]
pub struct NetworkState {
    pub node: NodeId,
    pub config: NetworkConfig,
    pub seaf: SeafRecord,
    pub amf: AmfRecord,
    pub smf: SmfRecord,
    rng: ChaCha20Rng,
}

#[derive(Serialize)]
struct DigestView<'a> {
    pending: Vec<(&'a ConnectionId, &'a PendingAuth)>,
    contexts: Vec<(&'a ConnectionId, &'a UeRecord)>,
    gutis: Vec<(&'a Supi, &'a GutiRecord)>,
    sessions: Vec<(&'a (ConnectionId, u8), &'a DrbConfig)>,
    audit: &'a [AuditEntry],
    rng_word: u128,
}

fn is_initial(kind: MessageKind) -> bool {
    matches!(kind, MessageKind::RegistrationRequest | MessageKind::TauRequest | MessageKind::EmergencyRequest)
}

impl NetworkState {
    pub fn new(node: NodeId, config: NetworkConfig, rng: ChaCha20Rng) -> Self {
        Self { node, config, seaf: SeafRecord::default(), amf: AmfRecord::default(), smf: SmfRecord::default(), rng }
    }

    pub fn plmn(&self) -> Plmn {
        self.config.plmn
    }

    pub fn digest(&self) -> [u8; 32] {
        let view = DigestView {
            pending: self.seaf.pending.iter().collect(),
            contexts: self.amf.contexts.iter().collect(),
            gutis: self.amf.gutis.iter().collect(),
            sessions: self.smf.sessions.iter().collect(),
            audit: &self.smf.audit,
            rng_word: self.rng.get_word_pos(),
        };
        Sha256::digest(bincode::serialize(&view).expect("state serializes")).into()
    }

    pub fn active_context(&self, conn: &ConnectionId) -> Option<&SecurityContext> {
        self.amf.contexts.get(conn).map(|r| &r.ctx).filter(|c| c.is_active())
    }

    pub fn broadcast_message(&self) -> ProtocolMessage {
        self.clear(Body::Broadcast { cell: self.config.cell }, AccessType::ThreeGpp)
    }

    /// CLEAR message, signed when CA mode is on.
    fn clear(&self, body: Body, access: AccessType) -> ProtocolMessage {
        let msg = ProtocolMessage::clear(body, self.config.plmn, access);
        match &self.config.signer {
            Some(s) => msg.signed_by(s),
            None => msg,
        }
    }

    fn reply(&mut self, conn: ConnectionId, body: Body, out: &mut StepOutput) {
        let plmn = self.config.plmn;
        let msg = match self.amf.contexts.get_mut(&conn).filter(|r| r.ctx.is_active()) {
            Some(rec) => ProtocolMessage::protected(&body, plmn, conn.access, rec.ctx.nas.as_mut().unwrap()),
            None => self.clear(body, conn.access),
        };
        out.send(conn.peer, msg);
    }

    fn reject(&mut self, conn: ConnectionId, kind: MessageKind, cause: RejectCause, out: &mut StepOutput) {
        self.seaf.pending.remove(&conn);
        let body = match kind {
            MessageKind::TauRequest => Body::TauReject { cause },
            _ => Body::RegistrationReject { cause },
        };
        self.reply(conn, body, out);
    }

    pub fn trigger(&mut self, trigger: NetworkTrigger, homes: &mut HomeDirectory) -> StepOutput {
        match trigger {
            NetworkTrigger::Broadcast => {
                let mut out = StepOutput::accepted();
                out.outgoing.push(Outgoing { to: Address::Broadcast, msg: self.broadcast_message() });
                out
            }
            NetworkTrigger::ReAuthenticate { ue, access } => {
                let conn = ConnectionId { peer: ue, access };
                let Some(rec) = self.amf.contexts.get(&conn).filter(|r| r.ctx.is_active() && r.supi.is_some())
                else {
                    return StepOutput::dropped("no active NAS connection");
                };
                let (supi, caps) = (rec.supi.unwrap(), rec.caps.clone());
                let mut out = StepOutput::accepted();
                self.start_auth(conn, supi, caps, PendingKind::ReAuth, MessageKind::RegistrationRequest, homes, &mut out);
                out
            }
            NetworkTrigger::Handover { ue, access, target_cell } => self.handover(ue, access, target_cell),
            NetworkTrigger::EstablishPduSession { ue, access, session_id } => {
                let conn = ConnectionId { peer: ue, access };
                if self.active_context(&conn).and_then(|c| c.as_keys).is_none() {
                    return StepOutput::dropped("no active context");
                }
                let before = self.smf.audit.len();
                let cfg = apply_up_policy(
                    PduSession { session_id },
                    self.config.up_policy,
                    self.config.local_smf_override,
                    &mut self.smf.audit,
                );
                self.smf.sessions.insert((conn, session_id), cfg);
                let mut out = StepOutput::accepted();
                for entry in &self.smf.audit[before..] {
                    out.events.push(NodeEvent::Audit(entry.event.clone()));
                }
                out
            }
        }
    }

    fn handover(&mut self, ue: NodeId, access: AccessType, target_cell: u32) -> StepOutput {
        let conn = ConnectionId { peer: ue, access };
        let policy = self.config.handover_security;
        let plmn = self.config.plmn;
        let Some(rec) = self.amf.contexts.get_mut(&conn).filter(|r| r.ctx.is_active() && r.ctx.as_keys.is_some())
        else {
            return StepOutput::dropped("no active context");
        };
        let ctx = &mut rec.ctx;
        let old = ctx.as_keys.unwrap();
        ctx.handover_ncc += 1;
        ctx.serving_cell = target_cell;
        let ncc = ctx.handover_ncc;
        let mut out = StepOutput::accepted();
        match policy {
            HandoverSecurity::Secure => {
                let nas = ctx.nas.as_mut().unwrap();
                let (cipher, integrity) = (nas.keys.cipher, nas.keys.integrity);
                ctx.as_keys = Some(derive_as_keys(derive_handover_k_gnb(&old.k_gnb, target_cell, ncc), cipher, integrity));
                let body = Body::HandoverCommand { target_cell, ncc, exposed_key: None };
                let msg = ProtocolMessage::protected(&body, plmn, access, nas);
                out.events.push(NodeEvent::Audit(format!("secure handover to cell {target_cell}")));
                out.send(ue, msg);
            }
            HandoverSecurity::Insecure => {
                let body = Body::HandoverCommand { target_cell, ncc, exposed_key: Some(old.k_gnb.0.to_vec()) };
                out.events.push(NodeEvent::Audit(format!("insecure handover to cell {target_cell}")));
                let msg = self.clear(body, access);
                out.send(ue, msg);
            }
        }
        out
    }

    pub fn deliver(&mut self, from: NodeId, msg: &ProtocolMessage, homes: &mut HomeDirectory) -> StepOutput {
        let conn = ConnectionId { peer: from, access: msg.access };
        match &msg.payload {
            Payload::Clear(body) => {
                if body.kind() != msg.kind {
                    return StepOutput::dropped("kind mismatch");
                }
                let mut out = StepOutput::accepted();
                if is_initial(msg.kind) {
                    // a fresh initial message supersedes the old connection
                    if self.amf.contexts.remove(&conn).is_some() {
                        out.events.push(NodeEvent::Context {
                            peer: from,
                            access: conn.access,
                            state: ContextState::Absent,
                        });
                    }
                    self.seaf.pending.remove(&conn);
                } else if self.active_context(&conn).is_some() {
                    return StepOutput::dropped("clear message on protected connection");
                }
                let inner = self.on_body(conn, body.clone(), false, homes);
                merge(&mut out, inner);
                out
            }
            Payload::Protected(env) => {
                if msg.kind == MessageKind::SecurityModeComplete {
                    return self.on_smc_complete(conn, env);
                }
                let mut fresh_sibling = false;
                let mut rec = match self.amf.contexts.get(&conn).filter(|r| r.ctx.is_active()) {
                    Some(r) => r.clone(),
                    None => match self.sibling_for(conn, msg) {
                        Some(r) => {
                            fresh_sibling = true;
                            r
                        }
                        None => return StepOutput::dropped("no security context"),
                    },
                };
                let plain = match unprotect(env, rec.ctx.nas.as_mut().unwrap()) {
                    Ok(p) => p,
                    Err(e) => return StepOutput::dropped(e.to_string()),
                };
                let Ok(body) = Body::decode(&plain) else {
                    return StepOutput::dropped("undecodable body");
                };
                if body.kind() != msg.kind {
                    return StepOutput::dropped("kind mismatch");
                }
                self.amf.contexts.insert(conn, rec);
                let mut out = StepOutput::accepted();
                if fresh_sibling {
                    out.events.push(NodeEvent::Context { peer: from, access: conn.access, state: ContextState::Active });
                }
                let inner = self.on_body(conn, body, true, homes);
                merge(&mut out, inner);
                out
            }
        }
    }

    /// Second access from a UE already registered here: the outer GUTI names
    /// the subscriber, whose NAS keys are reused with fresh counters.
    fn sibling_for(&self, conn: ConnectionId, msg: &ProtocolMessage) -> Option<UeRecord> {
        if !matches!(msg.kind, MessageKind::RegistrationRequest | MessageKind::TauRequest) {
            return None;
        }
        let guti = msg.guti_hint?;
        let supi = *self.amf.by_temp_id.get(&guti.temp_id).filter(|_| guti.plmn == self.config.plmn)?;
        let (_, existing) = self.amf.contexts.iter().find(|(c, r)| {
            c.peer == conn.peer && c.access != conn.access && r.supi == Some(supi) && r.ctx.is_active() && !r.ctx.emergency
        })?;
        Some(UeRecord { supi: existing.supi, caps: existing.caps.clone(), ctx: existing.ctx.sibling(conn) })
    }

    fn on_body(&mut self, conn: ConnectionId, body: Body, protected: bool, homes: &mut HomeDirectory) -> StepOutput {
        let mut out = StepOutput::accepted();
        match body {
            Body::RegistrationRequest { identity, capabilities, .. } if protected => {
                let _ = identity;
                self.update_caps(conn, capabilities);
                self.accept(conn, false, &mut out);
            }
            Body::TauRequest { capabilities, .. } if protected => {
                self.update_caps(conn, capabilities);
                self.accept(conn, false, &mut out);
            }
            Body::EmergencyRequest { .. } if protected => {
                self.accept(conn, true, &mut out);
            }
            Body::RegistrationRequest { identity, capabilities, .. } => {
                self.on_identity(conn, identity, capabilities, PendingKind::Registration, MessageKind::RegistrationRequest, homes, &mut out);
            }
            Body::TauRequest { guti, capabilities } => {
                self.on_identity(conn, MobileIdentity::Guti(guti), capabilities, PendingKind::Registration, MessageKind::TauRequest, homes, &mut out);
            }
            Body::EmergencyRequest { identity, capabilities } => {
                if let Some(MobileIdentity::Suci(suci)) = &identity {
                    if suci.scheme == SuciScheme::Null && self.config.unauthenticated_emergency_allowed {
                        return self.unauthenticated_emergency(conn, homes, suci.clone(), capabilities);
                    }
                }
                match identity {
                    Some(identity) => self.on_identity(conn, identity, capabilities, PendingKind::Emergency, MessageKind::EmergencyRequest, homes, &mut out),
                    None => {
                        self.seaf.pending.insert(
                            conn,
                            PendingAuth { kind: PendingKind::Emergency, supi: None, caps: capabilities, vector: None, candidate: None },
                        );
                        self.reply(conn, Body::IdentityRequest, &mut out);
                    }
                }
            }
            Body::IdentityResponse { suci } => {
                let Some(pending) = self.seaf.pending.get(&conn).filter(|p| p.supi.is_none()).cloned() else {
                    return StepOutput::dropped("no identity request outstanding");
                };
                let kind = match pending.kind {
                    PendingKind::Emergency => MessageKind::EmergencyRequest,
                    _ => MessageKind::RegistrationRequest,
                };
                match homes.get(&suci.plmn).map(|h| h.deconceal(&suci)) {
                    Some(Ok(supi)) => self.start_auth(conn, supi, pending.caps, pending.kind, kind, homes, &mut out),
                    _ => {
                        out.events.push(NodeEvent::Anomaly("identity response did not deconceal".into()));
                        self.reject(conn, kind, RejectCause::Temporary, &mut out);
                    }
                }
            }
            Body::AuthResponse(answer) => return self.on_auth_response(conn, answer, homes),
            other => return StepOutput::dropped(format!("unexpected {}", other.kind())),
        }
        out
    }

    fn update_caps(&mut self, conn: ConnectionId, caps: SecurityCapabilities) {
        if let Some(r) = self.amf.contexts.get_mut(&conn) {
            r.caps = caps;
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn on_identity(
        &mut self,
        conn: ConnectionId,
        identity: MobileIdentity,
        caps: SecurityCapabilities,
        kind: PendingKind,
        msg_kind: MessageKind,
        homes: &mut HomeDirectory,
        out: &mut StepOutput,
    ) {
        match identity {
            MobileIdentity::Suci(suci) => match homes.get(&suci.plmn).map(|h| h.deconceal(&suci)) {
                Some(Ok(supi)) => self.start_auth(conn, supi, caps, kind, msg_kind, homes, out),
                Some(Err(_)) => {
                    out.events.push(NodeEvent::Anomaly("SUCI did not deconceal".into()));
                    self.reject(conn, msg_kind, RejectCause::Temporary, out);
                }
                None => self.reject(conn, msg_kind, RejectCause::Temporary, out),
            },
            MobileIdentity::Guti(guti) => {
                let known = self.amf.by_temp_id.get(&guti.temp_id).copied().filter(|_| guti.plmn == self.config.plmn);
                match known {
                    Some(supi) => self.start_auth(conn, supi, caps, kind, msg_kind, homes, out),
                    None => {
                        self.seaf.pending.insert(conn, PendingAuth { kind, supi: None, caps, vector: None, candidate: None });
                        self.reply(conn, Body::IdentityRequest, out);
                    }
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn start_auth(
        &mut self,
        conn: ConnectionId,
        supi: Supi,
        caps: SecurityCapabilities,
        kind: PendingKind,
        msg_kind: MessageKind,
        homes: &mut HomeDirectory,
        out: &mut StepOutput,
    ) {
        let vector = homes.get_mut(&supi.plmn()).and_then(|h| h.generate_vector(&supi, self.config.plmn));
        let vector = match vector {
            Ok(v) => v,
            Err(HomeError::UnknownSubscriber(_)) => return self.reject(conn, msg_kind, RejectCause::Permanent, out),
            Err(_) => return self.reject(conn, msg_kind, RejectCause::Temporary, out),
        };
        let body = Body::AuthChallenge { nonce: vector.nonce, run_counter: vector.run_counter, autn: vector.autn };
        self.seaf.pending.insert(conn, PendingAuth { kind, supi: Some(supi), caps, vector: Some(vector), candidate: None });
        self.reply(conn, body, out);
    }

    fn on_auth_response(&mut self, conn: ConnectionId, answer: AuthAnswer, homes: &mut HomeDirectory) -> StepOutput {
        let Some(pending) = self.seaf.pending.get(&conn).filter(|p| p.vector.is_some() && p.candidate.is_none()).cloned()
        else {
            return StepOutput::dropped("no challenge outstanding");
        };
        let supi = pending.supi.unwrap();
        let vector = pending.vector.clone().unwrap();
        let mut out = StepOutput::accepted();
        match answer {
            AuthAnswer::Res(response) => {
                let confirmed = if hres(&response) == vector.hxres {
                    homes
                        .get_mut(&supi.plmn())
                        .and_then(|h| h.confirm(&supi, vector.run_counter, self.config.plmn, &response))
                } else {
                    Err(HomeError::AuthFailure)
                };
                let k_ausf = match confirmed {
                    Ok(k) => k,
                    Err(_) => {
                        self.seaf.pending.remove(&conn);
                        out.verdict = DeliveryVerdict::Rejected("authentication failed".into());
                        out.events.push(NodeEvent::Anomaly("UE response did not verify".into()));
                        self.reply(conn, Body::AuthResult { success: false }, &mut out);
                        return out;
                    }
                };
                let negotiated = match negotiate(&pending.caps, &self.config.policy) {
                    Ok(n) => n,
                    Err(e) => {
                        out.events.push(NodeEvent::Anomaly(e.to_string()));
                        self.reject(conn, MessageKind::RegistrationRequest, RejectCause::Temporary, &mut out);
                        return out;
                    }
                };
                let partial = SecurityContext::partial(conn, self.config.plmn, vector.run_counter, k_ausf);
                out.events.push(NodeEvent::Context { peer: conn.peer, access: conn.access, state: ContextState::Partial });
                let mut candidate = partial.activated(negotiated.cipher, negotiated.integrity, Direction::Downlink);
                candidate.serving_cell = self.config.cell.cell_id;
                self.reply(conn, Body::AuthResult { success: true }, &mut out);
                let smc = Body::SecurityModeCommand {
                    cipher: negotiated.cipher,
                    integrity: negotiated.integrity,
                    replayed_caps: self.config.policy.capability_echo.then_some(negotiated.replayed_caps),
                };
                let msg =
                    ProtocolMessage::protected(&smc, self.config.plmn, conn.access, candidate.nas.as_mut().unwrap());
                out.send(conn.peer, msg);
                self.seaf.pending.insert(conn, PendingAuth { candidate: Some(candidate), ..pending });
            }
            AuthAnswer::MacFailure => {
                self.seaf.pending.remove(&conn);
                out.verdict = DeliveryVerdict::Rejected("UE rejected network authentication".into());
                out.events.push(NodeEvent::Anomaly("UE reported AUTN failure".into()));
            }
            AuthAnswer::SyncFailure { usim_counter, mac } => {
                let resynced = homes.get_mut(&supi.plmn()).and_then(|h| h.resync(&supi, &vector.nonce, usim_counter, &mac));
                if resynced.is_err() {
                    self.seaf.pending.remove(&conn);
                    out.verdict = DeliveryVerdict::Rejected("resynchronization rejected".into());
                    return out;
                }
                out.events.push(NodeEvent::Audit(format!("resynchronized run counter to {usim_counter}")));
                let msg_kind = match pending.kind {
                    PendingKind::Emergency => MessageKind::EmergencyRequest,
                    _ => MessageKind::RegistrationRequest,
                };
                self.start_auth(conn, supi, pending.caps, pending.kind, msg_kind, homes, &mut out);
            }
        }
        out
    }

    fn on_smc_complete(&mut self, conn: ConnectionId, env: &crate::crypto_suite::ProtectionEnvelope) -> StepOutput {
        let Some(pending) = self.seaf.pending.get(&conn).filter(|p| p.candidate.is_some()).cloned() else {
            return StepOutput::dropped("no security mode command outstanding");
        };
        let mut candidate = pending.candidate.clone().unwrap();
        let plain = match unprotect(env, candidate.nas.as_mut().unwrap()) {
            Ok(p) => p,
            Err(e) => return StepOutput::dropped(e.to_string()),
        };
        if !matches!(Body::decode(&plain), Ok(Body::SecurityModeComplete)) {
            return StepOutput::dropped("undecodable security mode complete");
        }
        self.seaf.pending.remove(&conn);
        self.amf.contexts.insert(conn, UeRecord { supi: pending.supi, caps: pending.caps, ctx: candidate });
        let mut out = StepOutput::accepted();
        out.events.push(NodeEvent::Context { peer: conn.peer, access: conn.access, state: ContextState::Active });
        match pending.kind {
            PendingKind::ReAuth => {}
            PendingKind::Registration => self.accept(conn, false, &mut out),
            PendingKind::Emergency => self.accept(conn, true, &mut out),
        }
        out
    }

    /// Registration accept with GUTI handling per policy.
    fn accept(&mut self, conn: ConnectionId, emergency: bool, out: &mut StepOutput) {
        let supi = self.amf.contexts.get(&conn).and_then(|r| r.supi);
        let guti = supi.map(|supi| {
            let rec = match self.amf.gutis.get(&supi).copied() {
                None => GutiRecord { guti: allocate_guti(self.config.plmn, &mut self.rng), events: 0 },
                Some(mut rec) => {
                    rec.events += 1;
                    let next = reassign_guti(rec.guti, self.config.guti_policy, rec.events, &mut self.rng);
                    if next != rec.guti {
                        self.amf.by_temp_id.remove(&rec.guti.temp_id);
                        rec = GutiRecord { guti: next, events: 0 };
                    }
                    rec
                }
            };
            self.amf.by_temp_id.insert(rec.guti.temp_id, supi);
            self.amf.gutis.insert(supi, rec);
            rec.guti
        });
        self.reply(conn, Body::RegistrationAccept { guti, emergency }, out);
    }

    fn unauthenticated_emergency(
        &mut self,
        conn: ConnectionId,
        homes: &HomeDirectory,
        suci: crate::identity::Suci,
        caps: SecurityCapabilities,
    ) -> StepOutput {
        let mut out = StepOutput::accepted();
        let supi = homes.get(&suci.plmn).and_then(|h| h.deconceal(&suci).ok());
        let mut ctx = SecurityContext::null_emergency(conn, self.config.plmn, Direction::Downlink);
        ctx.serving_cell = self.config.cell.cell_id;
        self.amf.contexts.insert(conn, UeRecord { supi: None, caps, ctx });
        out.events.push(NodeEvent::Context { peer: conn.peer, access: conn.access, state: ContextState::Active });
        out.events.push(NodeEvent::Audit(format!(
            "unauthenticated emergency session for {}",
            supi.map(|s| s.to_string()).unwrap_or_else(|| "unknown subscriber".into())
        )));
        self.reply(conn, Body::RegistrationAccept { guti: None, emergency: true }, &mut out);
        out
    }
}

fn merge(out: &mut StepOutput, inner: StepOutput) {
    out.verdict = inner.verdict;
    out.outgoing.extend(inner.outgoing);
    out.events.extend(inner.events);
}
