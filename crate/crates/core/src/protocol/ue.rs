//! UE state machine.
//!
//! Acceptance rules applied to every delivered message, in order:
//! 1. Broadcast system information is recorded (after the CA check in CA mode).
//! 2. A CLEAR NAS message from a peer the UE shares an active context with is
//!    discarded.
//! 3. In CA mode every CLEAR message must carry a signature chaining to the
//!    trust store; anything else is discarded before the UE acts on it.
//! 4. Protected messages must unprotect under the connection's context.
//!
//! Only the peer the UE is currently registering with may drive the
//! registration procedure.

use std::collections::{BTreeMap, BTreeSet};

use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::crypto_suite::{bidding_down_detected, unprotect, AlgorithmId, Direction, SecurityCapabilities};
use crate::identity::{conceal_supi, Guti, HnKeyMaterial, Plmn, Suci, Supi};
use crate::keys::{derive_as_keys, derive_handover_k_gnb, derive_k_ausf, RootKey};
use crate::pki::TrustStore;

use super::context::{ConnectionId, ContextState, SecurityContext};
use super::home::{autn, res, resync_mac};
use super::message::{
    verify_preauth_signature, AccessType, AuthAnswer, AuthMethod, Body, CellInfo, MessageKind, MobileIdentity,
    NodeId, Payload, ProtocolMessage, RejectCause, SignatureVerdict,
};
use super::{DeliveryVerdict, NodeEvent, StepOutput};

/// How the USIM picks a concealment scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SuciSetting {
    /// The home network configured the null scheme, even if a key exists.
    HnConfiguredNull,
    /// Public-key scheme whenever the home network key is provisioned.
    PublicKeyIfProvisioned,
}

#[derive(Debug, Clone)]
pub struct UeConfig {
    pub supi: Supi,
    pub capabilities: SecurityCapabilities,
    pub auth_method: AuthMethod,
    pub suci: SuciSetting,
    pub unauthenticated_emergency_allowed: bool,
    /// Present iff CA mode is on.
    pub trust_store: Option<TrustStore>,
}

#[derive(Debug, Clone)]
pub struct Usim {
    pub root: RootKey,
    pub run_counter: u64,
    pub hn_keys: HnKeyMaterial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UePhase {
    Deregistered,
    Registering,
    SecurityMode,
    AwaitingAccept,
    Registered,
    EmergencySession,
    /// Barred after a permanent reject.
    Denied,
    /// Attached to a legacy pseudo-network without mutual authentication.
    LegacyAttached,
    /// Procedure aborted after detecting tampering.
    Aborted,
}

impl UePhase {
    pub fn label(self) -> &'static str {
        match self {
            UePhase::Deregistered => "deregistered",
            UePhase::Registering => "registering",
            UePhase::SecurityMode => "security-mode",
            UePhase::AwaitingAccept => "awaiting-accept",
            UePhase::Registered => "registered",
            UePhase::EmergencySession => "emergency-session",
            UePhase::Denied => "denied",
            UePhase::LegacyAttached => "legacy-attached",
            UePhase::Aborted => "aborted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProcedureKind {
    Registration,
    Tau,
    Emergency,
    ReAuth,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Procedure {
    pub kind: ProcedureKind,
    pub peer: NodeId,
    pub plmn: Plmn,
    pub access: AccessType,
    pub sent_caps: SecurityCapabilities,
    /// Context waiting for its security mode command.
    pub partial: Option<SecurityContext>,
}

impl Procedure {
    fn connection(&self) -> ConnectionId {
        ConnectionId { peer: self.peer, access: self.access }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UeTrigger {
    /// Select the best cell and register there.
    PowerOn,
    Register { cell: NodeId, access: AccessType },
    /// Re-evaluate cells; moving to a new cell runs a tracking area update.
    Reselect,
    /// `unauthenticated` asks for the unauthenticated emergency path; the UE
    /// only takes it when both it and the cell allow it.
    EmergencyCall { unauthenticated: bool },
}

#[derive(Debug, Clone)]
pub struct UeState {
    pub node: NodeId,
    pub config: UeConfig,
    pub usim: Usim,
    pub phase: UePhase,
    pub cells: BTreeMap<NodeId, CellInfo>,
    pub camped: Option<NodeId>,
    pub barred: BTreeSet<Plmn>,
    pub gutis: BTreeMap<Plmn, Guti>,
    pub contexts: BTreeMap<ConnectionId, SecurityContext>,
    pub procedure: Option<Procedure>,
    pub legacy_network: Option<String>,
    pub auth_failures: u32,
    pub sync_failures: u32,
    rng: ChaCha20Rng,
}

#[derive(Serialize)]
struct DigestView<'a> {
    phase: UePhase,
    cells: &'a BTreeMap<NodeId, CellInfo>,
    camped: Option<NodeId>,
    barred: &'a BTreeSet<Plmn>,
    gutis: Vec<(&'a Plmn, &'a Guti)>,
    contexts: Vec<&'a SecurityContext>,
    procedure: &'a Option<Procedure>,
    legacy: &'a Option<String>,
    run_counter: u64,
    failures: (u32, u32),
    rng_word: u128,
}

impl UeState {
    pub fn new(node: NodeId, config: UeConfig, usim: Usim, rng: ChaCha20Rng) -> Self {
        Self {
            node,
            config,
            usim,
            phase: UePhase::Deregistered,
            cells: BTreeMap::new(),
            camped: None,
            barred: BTreeSet::new(),
            gutis: BTreeMap::new(),
            contexts: BTreeMap::new(),
            procedure: None,
            legacy_network: None,
            auth_failures: 0,
            sync_failures: 0,
            rng,
        }
    }

    /// Hash over all mutable state, including the RNG position.
    pub fn digest(&self) -> [u8; 32] {
        let view = DigestView {
            phase: self.phase,
            cells: &self.cells,
            camped: self.camped,
            barred: &self.barred,
            gutis: self.gutis.iter().collect(),
            contexts: self.contexts.values().collect(),
            procedure: &self.procedure,
            legacy: &self.legacy_network,
            run_counter: self.usim.run_counter,
            failures: (self.auth_failures, self.sync_failures),
            rng_word: self.rng.get_word_pos(),
        };
        Sha256::digest(bincode::serialize(&view).expect("state serializes")).into()
    }

    pub fn supi(&self) -> Supi {
        self.config.supi
    }

    pub fn active_context_with(&self, peer: NodeId) -> Option<&SecurityContext> {
        self.contexts.values().find(|c| c.connection.peer == peer && c.is_active())
    }

    /// Highest-priority cell whose PLMN is not barred; ties go to the lower
    /// node id.
    pub fn best_cell(&self) -> Option<NodeId> {
        self.cells
            .iter()
            .filter(|(_, c)| !self.barred.contains(&c.plmn))
            .max_by(|(na, a), (nb, b)| a.priority.cmp(&b.priority).then(nb.cmp(na)))
            .map(|(n, _)| *n)
    }

    fn set_phase(&mut self, phase: UePhase, out: &mut StepOutput) {
        if self.phase != phase {
            self.phase = phase;
            out.events.push(NodeEvent::Phase(phase.label().to_string()));
        }
    }

    fn conceal(&mut self) -> Suci {
        let keys = match self.config.suci {
            SuciSetting::HnConfiguredNull => self.usim.hn_keys.without_public_key(),
            SuciSetting::PublicKeyIfProvisioned => self.usim.hn_keys.clone(),
        };
        conceal_supi(&self.config.supi, &keys, &mut self.rng)
    }

    fn clear_msg(&self, body: Body, access: AccessType) -> ProtocolMessage {
        ProtocolMessage::clear(body, self.config.supi.plmn(), access)
    }

    fn protected_msg(&mut self, conn: ConnectionId, body: &Body) -> ProtocolMessage {
        let plmn = self.config.supi.plmn();
        let ctx = self.contexts.get_mut(&conn).expect("protected send needs a context");
        let msg = ProtocolMessage::protected(body, plmn, conn.access, ctx.nas.as_mut().expect("active context"));
        match self.gutis.get(&ctx.serving_network) {
            Some(g) => msg.with_guti_hint(*g),
            None => msg,
        }
    }

    /// Sends under the connection's context if it is active, else CLEAR.
    fn reply(&mut self, conn: ConnectionId, body: Body, out: &mut StepOutput) {
        let msg = if self.contexts.get(&conn).is_some_and(|c| c.is_active()) {
            self.protected_msg(conn, &body)
        } else {
            self.clear_msg(body, conn.access)
        };
        out.send(conn.peer, msg);
    }

    pub fn trigger(&mut self, trigger: UeTrigger) -> StepOutput {
        match trigger {
            UeTrigger::PowerOn => match self.best_cell() {
                Some(cell) => self.start_registration(cell, AccessType::ThreeGpp, ProcedureKind::Registration),
                None => StepOutput::dropped("no usable cell"),
            },
            UeTrigger::Register { cell, access } => {
                self.start_registration(cell, access, ProcedureKind::Registration)
            }
            UeTrigger::Reselect => self.reselect(),
            UeTrigger::EmergencyCall { unauthenticated } => self.emergency(unauthenticated),
        }
    }

    fn start_registration(&mut self, cell: NodeId, access: AccessType, kind: ProcedureKind) -> StepOutput {
        if matches!(self.phase, UePhase::Denied | UePhase::LegacyAttached) {
            return StepOutput::dropped(format!("ue is {}", self.phase.label()));
        }
        let Some(info) = self.cells.get(&cell).copied() else {
            return StepOutput::dropped("unknown cell");
        };
        if self.barred.contains(&info.plmn) {
            return StepOutput::dropped("plmn barred");
        }
        let mut out = StepOutput::accepted();
        let conn = ConnectionId { peer: cell, access };
        let caps = self.config.capabilities.clone();
        let guti = self.gutis.get(&info.plmn).copied();

        let msg = if self.contexts.get(&conn).is_some_and(|c| c.is_active()) {
            // registration update over the existing connection
            let identity = guti.map(MobileIdentity::Guti).unwrap_or_else(|| MobileIdentity::Suci(self.conceal()));
            let body = self.initial_body(kind, identity, caps.clone());
            self.protected_msg(conn, &body)
        } else if let Some(sibling) = self.active_context_with(cell).filter(|c| !c.emergency).cloned() {
            // second access into the same serving network: shared NAS keys,
            // fresh counters
            let ctx = sibling.sibling(conn);
            self.contexts.insert(conn, ctx);
            out.events.push(NodeEvent::Context { peer: cell, access, state: ContextState::Active });
            let identity = guti.map(MobileIdentity::Guti).unwrap_or_else(|| MobileIdentity::Suci(self.conceal()));
            let body = self.initial_body(kind, identity, caps.clone());
            self.protected_msg(conn, &body)
        } else {
            let identity = guti.map(MobileIdentity::Guti).unwrap_or_else(|| MobileIdentity::Suci(self.conceal()));
            self.clear_msg(self.initial_body(kind, identity, caps.clone()), access)
        };
        self.procedure = Some(Procedure { kind, peer: cell, plmn: info.plmn, access, sent_caps: caps, partial: None });
        self.camped = Some(cell);
        self.set_phase(UePhase::Registering, &mut out);
        out.send(cell, msg);
        out
    }

    fn initial_body(&self, kind: ProcedureKind, identity: MobileIdentity, capabilities: SecurityCapabilities) -> Body {
        match (kind, identity) {
            (ProcedureKind::Tau, MobileIdentity::Guti(guti)) => Body::TauRequest { guti, capabilities },
            (_, identity) => {
                Body::RegistrationRequest { identity, capabilities, auth_method: self.config.auth_method }
            }
        }
    }

    fn reselect(&mut self) -> StepOutput {
        let Some(best) = self.best_cell() else {
            return StepOutput::dropped("no usable cell");
        };
        if self.camped == Some(best) {
            return StepOutput::dropped("already camped on best cell");
        }
        let registered = matches!(self.phase, UePhase::Registered | UePhase::EmergencySession);
        if registered && !self.gutis.is_empty() {
            self.start_registration(best, AccessType::ThreeGpp, ProcedureKind::Tau)
        } else {
            self.start_registration(best, AccessType::ThreeGpp, ProcedureKind::Registration)
        }
    }

    fn emergency(&mut self, unauthenticated: bool) -> StepOutput {
        if self.phase == UePhase::LegacyAttached {
            return StepOutput::dropped("ue is legacy-attached");
        }
        let Some(cell) = self.camped.or_else(|| self.best_cell()) else {
            return StepOutput::dropped("no usable cell");
        };
        let Some(info) = self.cells.get(&cell).copied() else {
            return StepOutput::dropped("unknown cell");
        };
        let access = AccessType::ThreeGpp;
        let conn = ConnectionId { peer: cell, access };
        let caps = self.config.capabilities.clone();
        let mut out = StepOutput::accepted();

        if unauthenticated && self.config.unauthenticated_emergency_allowed && info.unauthenticated_emergency {
            // The unauthenticated path drops any existing context and
            // identifies with a null-scheme SUCI in the clear.
            if self.contexts.remove(&conn).is_some() {
                out.events.push(NodeEvent::Context { peer: cell, access, state: ContextState::Absent });
            }
            let suci = conceal_supi(&self.config.supi, &HnKeyMaterial::default(), &mut self.rng);
            let pending = SecurityContext::null_emergency(conn, info.plmn, Direction::Uplink);
            self.procedure = Some(Procedure {
                kind: ProcedureKind::Emergency,
                peer: cell,
                plmn: info.plmn,
                access,
                sent_caps: caps.clone(),
                partial: Some(pending),
            });
            let body = Body::EmergencyRequest { identity: Some(MobileIdentity::Suci(suci)), capabilities: caps };
            self.camped = Some(cell);
            self.set_phase(UePhase::Registering, &mut out);
            out.send(cell, self.clear_msg(body, access));
            return out;
        }

        let body_identity = if self.contexts.get(&conn).is_some_and(|c| c.is_active()) {
            None
        } else {
            Some(match self.gutis.get(&info.plmn) {
                Some(g) => MobileIdentity::Guti(*g),
                None => MobileIdentity::Suci(self.conceal()),
            })
        };
        let body = Body::EmergencyRequest { identity: body_identity, capabilities: caps.clone() };
        self.procedure = Some(Procedure {
            kind: ProcedureKind::Emergency,
            peer: cell,
            plmn: info.plmn,
            access,
            sent_caps: caps,
            partial: None,
        });
        self.camped = Some(cell);
        self.reply(conn, body, &mut out);
        if !self.contexts.get(&conn).is_some_and(|c| c.is_active()) {
            self.set_phase(UePhase::Registering, &mut out);
        }
        out
    }

    pub fn deliver(&mut self, from: NodeId, msg: &ProtocolMessage) -> StepOutput {
        if msg.kind == MessageKind::Broadcast {
            return self.on_broadcast(from, msg);
        }
        match &msg.payload {
            Payload::Clear(body) => {
                if body.kind() != msg.kind {
                    return StepOutput::dropped("kind mismatch");
                }
                if msg.kind.is_nas() && self.active_context_with(from).is_some() {
                    return StepOutput::dropped("clear message on protected connection");
                }
                if self.config.trust_store.is_some()
                    && verify_preauth_signature(msg, self.config.trust_store.as_ref()) != SignatureVerdict::Verified
                {
                    return StepOutput::dropped("pre-authentication signature invalid");
                }
                self.on_clear(from, msg, body)
            }
            Payload::Protected(_) => self.on_protected(from, msg),
        }
    }

    fn on_broadcast(&mut self, from: NodeId, msg: &ProtocolMessage) -> StepOutput {
        let Payload::Clear(Body::Broadcast { cell }) = &msg.payload else {
            return StepOutput::dropped("malformed broadcast");
        };
        if cell.plmn != msg.sender_claimed_plmn {
            return StepOutput::dropped("malformed broadcast");
        }
        if self.config.trust_store.is_some()
            && verify_preauth_signature(msg, self.config.trust_store.as_ref()) != SignatureVerdict::Verified
        {
            return StepOutput::dropped("pre-authentication signature invalid");
        }
        self.cells.insert(from, *cell);
        StepOutput::accepted()
    }

    fn current_procedure_with(&self, peer: NodeId) -> Option<&Procedure> {
        self.procedure.as_ref().filter(|p| p.peer == peer)
    }

    fn on_clear(&mut self, from: NodeId, msg: &ProtocolMessage, body: &Body) -> StepOutput {
        let Some(proc) = self.current_procedure_with(from).cloned() else {
            if let Body::HandoverCommand { target_cell, ncc, exposed_key } = body {
                return self.on_handover(from, msg.access, *target_cell, *ncc, exposed_key.is_some());
            }
            return StepOutput::dropped("no procedure with sender");
        };
        match body {
            Body::IdentityRequest => {
                let mut out = StepOutput::accepted();
                let suci = self.conceal();
                out.send(from, self.clear_msg(Body::IdentityResponse { suci }, proc.access));
                out
            }
            Body::AuthChallenge { nonce, run_counter, autn } => {
                self.on_challenge(proc, *nonce, *run_counter, *autn)
            }
            Body::AuthResult { success } => {
                let mut out = StepOutput::accepted();
                if !success {
                    self.procedure = None;
                    self.set_phase(UePhase::Deregistered, &mut out);
                }
                out
            }
            Body::RegistrationReject { cause } | Body::TauReject { cause } => {
                self.on_reject(msg.sender_claimed_plmn, *cause)
            }
            Body::DowngradeCommand { legacy_network } => {
                // Only a network for which the USIM holds no key can send
                // the UE to a legacy network.
                if self.usim.hn_keys.provisioned_networks.contains(&msg.sender_claimed_plmn) {
                    return StepOutput::dropped("downgrade from provisioned network");
                }
                let mut out = StepOutput::accepted();
                self.legacy_network = Some(legacy_network.clone());
                self.procedure = None;
                out.events.push(NodeEvent::Anomaly(format!("attached to legacy network {legacy_network}")));
                self.set_phase(UePhase::LegacyAttached, &mut out);
                out
            }
            Body::HandoverCommand { target_cell, ncc, exposed_key } => {
                self.on_handover(from, msg.access, *target_cell, *ncc, exposed_key.is_some())
            }
            _ => StepOutput::dropped(format!("unexpected clear {}", body.kind())),
        }
    }

    fn on_reject(&mut self, plmn: Plmn, cause: RejectCause) -> StepOutput {
        let mut out = StepOutput::accepted();
        self.procedure = None;
        self.barred.insert(plmn);
        self.camped = None;
        match cause {
            RejectCause::Permanent => self.set_phase(UePhase::Denied, &mut out),
            RejectCause::Temporary => self.set_phase(UePhase::Deregistered, &mut out),
        }
        out
    }

    fn on_challenge(&mut self, proc: Procedure, nonce: [u8; 16], run_counter: u64, token: [u8; 8]) -> StepOutput {
        let conn = proc.connection();
        let mut out = StepOutput::accepted();
        if autn(&self.usim.root, &nonce, run_counter) != token {
            self.auth_failures += 1;
            out.verdict = DeliveryVerdict::Rejected("network authentication failed".into());
            out.events.push(NodeEvent::Anomaly("AUTN check failed".into()));
            self.reply(conn, Body::AuthResponse(AuthAnswer::MacFailure), &mut out);
            return out;
        }
        if run_counter <= self.usim.run_counter {
            self.sync_failures += 1;
            out.verdict = DeliveryVerdict::Rejected("run counter not fresh".into());
            let usim_counter = self.usim.run_counter;
            let mac = resync_mac(&self.usim.root, &nonce, usim_counter);
            self.reply(conn, Body::AuthResponse(AuthAnswer::SyncFailure { usim_counter, mac }), &mut out);
            return out;
        }
        self.usim.run_counter = run_counter;
        let response = res(&self.usim.root, &nonce, run_counter, &proc.plmn);
        let k_ausf = derive_k_ausf(&self.usim.root, &proc.plmn, run_counter);
        let partial = SecurityContext::partial(conn, proc.plmn, run_counter, k_ausf);
        out.events.push(NodeEvent::Context { peer: conn.peer, access: conn.access, state: ContextState::Partial });
        self.procedure = Some(Procedure { partial: Some(partial), ..proc });
        self.reply(conn, Body::AuthResponse(AuthAnswer::Res(response)), &mut out);
        self.set_phase(UePhase::SecurityMode, &mut out);
        out
    }

    fn on_protected(&mut self, from: NodeId, msg: &ProtocolMessage) -> StepOutput {
        let env = msg.envelope().expect("protected payload");
        let conn = ConnectionId { peer: from, access: msg.access };

        if msg.kind == MessageKind::SecurityModeCommand {
            return self.on_smc(conn, msg);
        }

        // Either the connection's context or a pending null emergency one.
        let (ctx, pending) = match self.contexts.get(&conn).filter(|c| c.is_active()) {
            Some(c) => (c.clone(), false),
            None => match self.current_procedure_with(from).and_then(|p| p.partial.clone()) {
                Some(p) if p.emergency && p.connection == conn => (p, true),
                _ => return StepOutput::dropped("no security context"),
            },
        };
        let mut nas = ctx.nas.clone().expect("active context has NAS state");
        let plain = match unprotect(env, &mut nas) {
            Ok(p) => p,
            Err(e) => return StepOutput::dropped(e.to_string()),
        };
        let Ok(body) = Body::decode(&plain) else {
            return StepOutput::dropped("undecodable body");
        };
        if body.kind() != msg.kind {
            return StepOutput::dropped("kind mismatch");
        }
        let mut out = StepOutput::accepted();
        let mut ctx = ctx;
        ctx.nas = Some(nas);
        if pending {
            out.events.push(NodeEvent::Context { peer: from, access: conn.access, state: ContextState::Active });
        }
        self.contexts.insert(conn, ctx);

        let inner = match body {
            Body::RegistrationAccept { guti, emergency } => self.on_accept(from, guti, emergency),
            Body::AuthChallenge { nonce, run_counter, autn } => {
                let proc = match self.current_procedure_with(from) {
                    Some(p) => p.clone(),
                    None => {
                        let ctx = &self.contexts[&conn];
                        Procedure {
                            kind: ProcedureKind::ReAuth,
                            peer: from,
                            plmn: ctx.serving_network,
                            access: conn.access,
                            sent_caps: self.config.capabilities.clone(),
                            partial: None,
                        }
                    }
                };
                self.on_challenge(proc, nonce, run_counter, autn)
            }
            Body::AuthResult { .. } => StepOutput::accepted(),
            Body::RegistrationReject { cause } | Body::TauReject { cause } => {
                self.on_reject(msg.sender_claimed_plmn, cause)
            }
            Body::HandoverCommand { target_cell, ncc, exposed_key } => {
                self.on_handover(from, conn.access, target_cell, ncc, exposed_key.is_some())
            }
            other => StepOutput::dropped(format!("unexpected protected {}", other.kind())),
        };
        out.verdict = inner.verdict;
        out.outgoing.extend(inner.outgoing);
        out.events.extend(inner.events);
        out
    }

    fn on_accept(&mut self, from: NodeId, guti: Option<Guti>, emergency: bool) -> StepOutput {
        let Some(proc) = self.current_procedure_with(from).cloned() else {
            return StepOutput::dropped("no procedure with sender");
        };
        let mut out = StepOutput::accepted();
        if let Some(g) = guti {
            self.gutis.insert(g.plmn, g);
        }
        self.procedure = None;
        self.camped = Some(from);
        let phase = if emergency || proc.kind == ProcedureKind::Emergency {
            UePhase::EmergencySession
        } else {
            UePhase::Registered
        };
        self.set_phase(phase, &mut out);
        out
    }

    fn on_smc(&mut self, conn: ConnectionId, msg: &ProtocolMessage) -> StepOutput {
        let env = msg.envelope().expect("protected payload");
        let Some(proc) = self.current_procedure_with(conn.peer).cloned() else {
            return StepOutput::dropped("no procedure with sender");
        };
        let Some(partial) = proc.partial.clone().filter(|p| !p.emergency && p.connection == conn) else {
            return StepOutput::dropped("no pending authentication");
        };
        let caps = &self.config.capabilities;
        if !caps.ciphering.contains(&env.cipher_alg) || !caps.integrity.contains(&env.integrity_alg) {
            return StepOutput::dropped("algorithms not in ue capabilities");
        }
        if env.integrity_alg == AlgorithmId::Nia0 && proc.kind != ProcedureKind::Emergency {
            return StepOutput::dropped("null integrity outside emergency");
        }
        let mut candidate = partial.activated(env.cipher_alg, env.integrity_alg, Direction::Uplink);
        let plain = match unprotect(env, candidate.nas.as_mut().unwrap()) {
            Ok(p) => p,
            Err(e) => return StepOutput::dropped(e.to_string()),
        };
        let Ok(Body::SecurityModeCommand { cipher, integrity, replayed_caps }) = Body::decode(&plain) else {
            return StepOutput::dropped("undecodable security mode command");
        };
        if cipher != env.cipher_alg || integrity != env.integrity_alg {
            return StepOutput::dropped("algorithm mismatch");
        }
        let mut out = StepOutput::accepted();
        if let Some(replayed) = replayed_caps {
            if bidding_down_detected(&proc.sent_caps, &replayed) {
                out.verdict = DeliveryVerdict::Rejected("bidding-down detected".into());
                out.events.push(NodeEvent::Anomaly("replayed capabilities differ from sent".into()));
                self.procedure = None;
                self.set_phase(UePhase::Aborted, &mut out);
                return out;
            }
        }
        self.contexts.insert(conn, candidate);
        out.events.push(NodeEvent::Context { peer: conn.peer, access: conn.access, state: ContextState::Active });
        let complete = self.protected_msg(conn, &Body::SecurityModeComplete);
        out.send(conn.peer, complete);
        if proc.kind == ProcedureKind::ReAuth {
            self.procedure = None;
        } else {
            self.procedure = Some(Procedure { partial: None, ..proc });
            self.set_phase(UePhase::AwaitingAccept, &mut out);
        }
        out
    }

    fn on_handover(&mut self, from: NodeId, access: AccessType, target: u32, ncc: u32, insecure: bool) -> StepOutput {
        let conn = ConnectionId { peer: from, access };
        let Some(ctx) = self.contexts.get_mut(&conn).filter(|c| c.is_active() && c.as_keys.is_some()) else {
            return StepOutput::dropped("no security context");
        };
        if !insecure {
            let old = ctx.as_keys.unwrap();
            let (cipher, integrity) = {
                let nas = ctx.nas.as_ref().unwrap();
                (nas.keys.cipher, nas.keys.integrity)
            };
            ctx.as_keys = Some(derive_as_keys(derive_handover_k_gnb(&old.k_gnb, target, ncc), cipher, integrity));
        }
        ctx.serving_cell = target;
        ctx.handover_ncc = ncc;
        let mut out = StepOutput::accepted();
        out.events.push(NodeEvent::Audit(format!(
            "handover to cell {target} ({})",
            if insecure { "keys unchanged" } else { "fresh AS keys" }
        )));
        out
    }
}
