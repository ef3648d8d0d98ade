//! The discrete-event simulation: node construction from a scenario, the
//! FIFO channel with attacker hooks, and high-level drivers (AKA runs,
//! context layouts, handovers).

use std::collections::{BTreeMap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::adversary::{sniff, AttackKind, Attacker};
use crate::crypto_suite::{OperatorPolicy, SecurityCapabilities};
use crate::identity::{HnKeyMaterial, HnKeyPair, SuciScheme};
use crate::pki::{CertificateAuthority, NetworkSigner, TrustStore};
use crate::protocol::home::HomeNetwork;
use crate::protocol::ue::Usim;
use crate::protocol::{
    AccessType, Address, CellInfo, ConfirmationEntry, ContextLayout, DeliveryVerdict, HomeDirectory, NetworkConfig,
    NetworkState, NetworkTrigger, NodeEvent, NodeId, ProtocolMessage, SecurityContext, StepOutput, SuciSetting,
    UeConfig, UePhase, UeState, UeTrigger, UpSecurityPolicy,
};

use super::channel::{Event, Transcript};
use super::scenario::{ScenarioConfig, ScenarioError};

/// Per-node randomness: independent ChaCha20 streams keyed by the scenario
/// seed and a node label.
pub fn sub_seed(seed: u64, label: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"fiveg-sim/seed");
    h.update(seed.to_be_bytes());
    h.update(label.as_bytes());
    h.finalize().into()
}

fn sub_rng(seed: u64, label: &str) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(sub_seed(seed, label))
}

/// A local event fed to a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Ue(UeTrigger),
    Network(NetworkTrigger),
    RogueBroadcast,
    RogueReject { to: NodeId, access: AccessType },
}

#[derive(Debug, Clone)]
struct InFlight {
    from: NodeId,
    to: NodeId,
    msg: ProtocolMessage,
    sent: u64,
}

/// All legitimate protocol state of a run.
#[derive(Debug, Clone)]
pub struct Nodes {
    pub ues: Vec<UeState>,
    pub networks: Vec<NetworkState>,
    pub homes: HomeDirectory,
}

impl Nodes {
    /// Builds every legitimate node for `config`. Independent of the attacker.
    pub fn build(config: &ScenarioConfig) -> Self {
        let seed = config.seed;
        let knobs = &config.knobs;
        let ca = knobs.ca_mode.then(|| CertificateAuthority::from_seed("global-5g-ca", sub_seed(seed, "ca")));
        let trust_store = ca.as_ref().map(|ca| TrustStore::with_anchor(ca.anchor()));

        let mut homes = HomeDirectory::default();
        for n in &config.networks {
            let keys = HnKeyPair::generate(&mut sub_rng(seed, &format!("hn-keys/{}", n.plmn)));
            let home = HomeNetwork::new(n.plmn, keys, sub_rng(seed, &format!("home/{}", n.plmn)));
            homes.homes.insert(n.plmn, home);
        }
        for s in &config.subscribers {
            homes.homes.get_mut(&s.supi.plmn()).expect("validated").add_subscriber(s.supi, s.root());
        }

        let networks = config
            .networks
            .iter()
            .enumerate()
            .map(|(j, n)| {
                let signer = ca
                    .as_ref()
                    .map(|ca| NetworkSigner::certified(ca, &n.name, n.plmn, sub_seed(seed, &format!("signer/{}", n.name))));
                let cfg = NetworkConfig {
                    name: n.name.clone(),
                    plmn: n.plmn,
                    cell: CellInfo {
                        plmn: n.plmn,
                        cell_id: n.cell_id,
                        priority: n.broadcast_priority,
                        unauthenticated_emergency: knobs.unauthenticated_emergency_allowed,
                    },
                    policy: OperatorPolicy {
                        cipher_preference: n.cipher_preference.clone(),
                        integrity_preference: n.integrity_preference.clone(),
                        null_algorithms_allowed: knobs.null_algorithms_allowed,
                        capability_echo: knobs.capability_echo,
                    },
                    unauthenticated_emergency_allowed: knobs.unauthenticated_emergency_allowed,
                    handover_security: knobs.handover_security,
                    up_policy: UpSecurityPolicy::home(knobs.up_policy.integrity, knobs.up_policy.confidentiality),
                    local_smf_override: knobs.local_smf_override.requirement(),
                    guti_policy: knobs.guti_policy,
                    signer,
                };
                NetworkState::new(Simulation::network_node(j), cfg, sub_rng(seed, &format!("network/{}", n.name)))
            })
            .collect();

        let ues = config
            .subscribers
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let home = &homes.homes[&s.supi.plmn()];
                let public_key = s.provisioned_networks.contains(&s.supi.plmn()).then_some(home.keys.public);
                let usim = Usim {
                    root: s.root(),
                    run_counter: s.sqn_skew,
                    hn_keys: HnKeyMaterial::usim(public_key, s.provisioned_networks.iter().copied()),
                };
                let cfg = UeConfig {
                    supi: s.supi,
                    capabilities: SecurityCapabilities::standard(knobs.null_algorithms_allowed),
                    auth_method: s.auth_method,
                    suci: match knobs.suci_scheme {
                        SuciScheme::Null => SuciSetting::HnConfiguredNull,
                        SuciScheme::ProbabilisticPk => SuciSetting::PublicKeyIfProvisioned,
                    },
                    unauthenticated_emergency_allowed: knobs.unauthenticated_emergency_allowed,
                    trust_store: trust_store.clone(),
                };
                UeState::new(Simulation::ue_node(i), cfg, usim, sub_rng(seed, &format!("ue/{i}")))
            })
            .collect();

        Self { ues, networks, homes }
    }

    pub fn ue_index(&self, node: NodeId) -> Option<usize> {
        self.ues.iter().position(|u| u.node == node)
    }

    pub fn network_index(&self, node: NodeId) -> Option<usize> {
        self.networks.iter().position(|n| n.node == node)
    }

    /// Feeds a local trigger to a legitimate node.
    pub fn apply_trigger(&mut self, node: NodeId, trigger: &Trigger) -> Option<StepOutput> {
        match trigger {
            Trigger::Ue(t) => self.ue_index(node).map(|i| self.ues[i].trigger(*t)),
            Trigger::Network(t) => {
                let j = self.network_index(node)?;
                Some(self.networks[j].trigger(*t, &mut self.homes))
            }
            Trigger::RogueBroadcast | Trigger::RogueReject { .. } => None,
        }
    }

    /// Delivers a message to a legitimate node.
    pub fn apply_delivery(&mut self, from: NodeId, to: NodeId, msg: &ProtocolMessage) -> Option<StepOutput> {
        if let Some(i) = self.ue_index(to) {
            return Some(self.ues[i].deliver(from, msg));
        }
        let j = self.network_index(to)?;
        Some(self.networks[j].deliver(from, msg, &mut self.homes))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("no active context")]
    NoActiveContext,
    #[error("authentication failed")]
    AuthFailure,
    #[error("run counter resynchronization did not complete")]
    SyncFailure,
    #[error("{0}")]
    Setup(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AkaSuccess {
    pub run_counter: u64,
    pub resyncs: u32,
    pub ledger_entry: ConfirmationEntry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextMode {
    Single,
    DistinctSn,
    SamePlmnDual,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HandoverOutcome {
    pub source_rrc_enc: Vec<u8>,
    pub target_rrc_enc: Vec<u8>,
    /// Transcript tick of the handover command.
    pub command_tick: u64,
}

/// Digests of every legitimate node after a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalStates {
    pub ue_phases: Vec<String>,
    pub ue_digests: Vec<String>,
    pub network_digests: Vec<String>,
    pub ledger_entries: usize,
}

pub struct Simulation {
    pub config: ScenarioConfig,
    pub ues: Vec<UeState>,
    pub networks: Vec<NetworkState>,
    pub homes: HomeDirectory,
    pub attacker: Option<Attacker>,
    pub transcript: Transcript,
    queue: VecDeque<InFlight>,
    names: BTreeMap<NodeId, String>,
}

const STEP_LIMIT: usize = 100_000;

impl Simulation {
    pub const ROGUE_NODE: NodeId = NodeId(1000);
    pub const ROGUE_NAME: &'static str = "rogue";

    pub fn ue_node(i: usize) -> NodeId {
        NodeId(i as u32)
    }

    pub fn network_node(j: usize) -> NodeId {
        NodeId(100 + j as u32)
    }

    /// Benign run: the attacker (if any capability is on) only observes.
    pub fn new(config: &ScenarioConfig) -> Result<Self, ScenarioError> {
        Self::with_attack(config, None)
    }

    pub fn with_attack(config: &ScenarioConfig, attack: Option<AttackKind>) -> Result<Self, ScenarioError> {
        config.validate()?;
        let Nodes { ues, networks, homes } = Nodes::build(config);
        let caps = config.attacker.capabilities();
        let attacker = caps.any().then(|| {
            Attacker::new(
                Self::ROGUE_NODE,
                caps,
                attack,
                config.attacker.lure_plmn,
                config.attacker.broadcast_priority,
                config.attacker.cell_id,
                sub_seed(config.seed, "rogue-keys"),
                sub_rng(config.seed, "rogue"),
            )
        });
        let names = Self::name_map(config);
        Ok(Self {
            config: config.clone(),
            ues,
            networks,
            homes,
            attacker,
            transcript: Transcript::default(),
            queue: VecDeque::new(),
            names,
        })
    }

    pub fn name_map(config: &ScenarioConfig) -> BTreeMap<NodeId, String> {
        let mut names = BTreeMap::new();
        for i in 0..config.subscribers.len() {
            names.insert(Self::ue_node(i), format!("ue{i}"));
        }
        for (j, n) in config.networks.iter().enumerate() {
            names.insert(Self::network_node(j), n.name.clone());
        }
        names.insert(Self::ROGUE_NODE, Self::ROGUE_NAME.to_string());
        names
    }

    pub fn name(&self, node: NodeId) -> String {
        self.names.get(&node).cloned().unwrap_or_else(|| format!("node{}", node.0))
    }

    pub fn subscriber_msins(&self) -> Vec<String> {
        self.ues.iter().map(|u| u.supi().msin().to_string()).collect()
    }

    pub fn attacker_mut(&mut self) -> Option<&mut Attacker> {
        self.attacker.as_mut()
    }

    fn ue_nodes(&self) -> Vec<NodeId> {
        self.ues.iter().map(|u| u.node).collect()
    }

    /// Records a node's events and queues its messages.
    fn emit(&mut self, node: NodeId, out: StepOutput, cause: u64) {
        let ue_nodes = self.ue_nodes();
        for ev in output_events(&self.names, node, &out) {
            self.transcript.push(ev, Some(cause));
        }
        for o in out.outgoing {
            let targets = match o.to {
                Address::Node(n) => vec![n],
                Address::Broadcast => ue_nodes.clone(),
            };
            for to in targets {
                let ev = send_event(&self.names, node, to, &o.msg);
                let sent = self.transcript.push(ev, Some(cause));
                self.queue.push_back(InFlight { from: node, to, msg: o.msg.clone(), sent });
            }
        }
    }

    fn record_trigger(&mut self, node: NodeId, trigger: Trigger) -> u64 {
        let ev = Event::Trigger {
            node: self.name(node),
            trigger: serde_json::to_value(trigger).expect("triggers serialize"),
        };
        self.transcript.push(ev, None)
    }

    pub fn ue_trigger(&mut self, ue: usize, t: UeTrigger) -> DeliveryVerdict {
        let node = self.ues[ue].node;
        let tick = self.record_trigger(node, Trigger::Ue(t));
        let out = self.ues[ue].trigger(t);
        let verdict = out.verdict.clone();
        self.emit(node, out, tick);
        verdict
    }

    pub fn network_trigger(&mut self, net: usize, t: NetworkTrigger) -> DeliveryVerdict {
        let node = self.networks[net].node;
        let tick = self.record_trigger(node, Trigger::Network(t));
        let out = self.networks[net].trigger(t, &mut self.homes);
        let verdict = out.verdict.clone();
        self.emit(node, out, tick);
        verdict
    }

    pub fn broadcast_all(&mut self) {
        for j in 0..self.networks.len() {
            self.network_trigger(j, NetworkTrigger::Broadcast);
        }
    }

    /// Rogue cell announcement; needs `can_broadcast`.
    pub fn rogue_broadcast(&mut self) -> bool {
        let Some(att) = self.attacker.as_ref().filter(|a| a.caps.can_broadcast) else {
            return false;
        };
        let msg = att.broadcast();
        let tick = self.record_trigger(Self::ROGUE_NODE, Trigger::RogueBroadcast);
        let out = StepOutput {
            verdict: DeliveryVerdict::Accepted,
            outgoing: vec![crate::protocol::Outgoing { to: Address::Broadcast, msg }],
            events: Vec::new(),
        };
        self.emit(Self::ROGUE_NODE, out, tick);
        true
    }

    /// Unsolicited permanent reject; needs `can_inject_preauth`.
    pub fn rogue_inject_reject(&mut self, to: NodeId, access: AccessType) -> bool {
        let Some(att) = self.attacker.as_ref().filter(|a| a.caps.can_inject_preauth) else {
            return false;
        };
        let msg = att.reject(access);
        self.rogue_inject(to, msg, Trigger::RogueReject { to, access })
    }

    fn rogue_inject(&mut self, to: NodeId, msg: ProtocolMessage, trigger: Trigger) -> bool {
        let tick = self.record_trigger(Self::ROGUE_NODE, trigger);
        let out = StepOutput {
            verdict: DeliveryVerdict::Accepted,
            outgoing: vec![crate::protocol::Outgoing { to: Address::Node(to), msg }],
            events: Vec::new(),
        };
        self.emit(Self::ROGUE_NODE, out, tick);
        true
    }

    /// Delivers the oldest in-flight message. Returns false when idle.
    pub fn step(&mut self) -> bool {
        let Some(f) = self.queue.pop_front() else {
            return false;
        };
        let mut msg = f.msg;
        let (from_name, to_name) = (self.name(f.from), self.name(f.to));
        if let Some(att) = self.attacker.as_mut() {
            if att.caps.can_sniff {
                let obs = sniff(&msg);
                let ev = Event::Observe {
                    by: Self::ROGUE_NAME.into(),
                    from: from_name.clone(),
                    to: to_name.clone(),
                    kind: obs.kind,
                    protection: obs.protection,
                    readable: obs.readable.map(hex::encode),
                    meta: obs.meta,
                };
                self.transcript.push(ev, Some(f.sent));
            }
            if att.caps.can_mutate_in_transit && att.drop_kinds.contains(&msg.kind) {
                let ev = Event::Drop { by: Self::ROGUE_NAME.into(), from: from_name, to: to_name, kind: msg.kind };
                self.transcript.push(ev, Some(f.sent));
                return true;
            }
            if f.from != Self::ROGUE_NODE && f.to != Self::ROGUE_NODE {
                if let Some(m) = att.mutate(&msg) {
                    let ev = Event::Mutate {
                        by: Self::ROGUE_NAME.into(),
                        from: from_name.clone(),
                        to: to_name.clone(),
                        kind: msg.kind,
                        before: hex::encode(msg.encode()),
                        after: hex::encode(m.encode()),
                    };
                    self.transcript.push(ev, Some(f.sent));
                    msg = m;
                }
            }
        }

        if f.to == Self::ROGUE_NODE {
            let replies = match self.attacker.as_mut() {
                Some(att) => att.on_receive(f.from, &msg),
                None => Vec::new(),
            };
            let tick = self.transcript.push(deliver_event(from_name, to_name, &msg, f.sent, "accepted".into()), None);
            let out = StepOutput {
                verdict: DeliveryVerdict::Accepted,
                outgoing: replies
                    .into_iter()
                    .map(|m| crate::protocol::Outgoing { to: Address::Node(f.from), msg: m })
                    .collect(),
                events: Vec::new(),
            };
            self.emit(Self::ROGUE_NODE, out, tick);
            return true;
        }

        let out = if let Some(i) = self.ues.iter().position(|u| u.node == f.to) {
            self.ues[i].deliver(f.from, &msg)
        } else if let Some(j) = self.networks.iter().position(|n| n.node == f.to) {
            self.networks[j].deliver(f.from, &msg, &mut self.homes)
        } else {
            StepOutput::dropped("no such node")
        };
        let tick = self.transcript.push(deliver_event(from_name, to_name, &msg, f.sent, out.verdict.label()), None);
        self.emit(f.to, out, tick);
        true
    }

    /// Steps until the channel is empty. Returns the number of deliveries.
    pub fn run_until_quiet(&mut self) -> usize {
        let mut n = 0;
        while n < STEP_LIMIT && self.step() {
            n += 1;
        }
        n
    }

    /// Networks broadcast, every UE powers on, and the channel drains.
    pub fn run_benign(&mut self) {
        self.broadcast_all();
        self.run_until_quiet();
        for i in 0..self.ues.len() {
            self.ue_trigger(i, UeTrigger::PowerOn);
        }
        self.run_until_quiet();
    }

    pub fn final_states(&self) -> FinalStates {
        FinalStates {
            ue_phases: self.ues.iter().map(|u| u.phase.label().to_string()).collect(),
            ue_digests: self.ues.iter().map(|u| hex::encode(u.digest())).collect(),
            network_digests: self.networks.iter().map(|n| hex::encode(n.digest())).collect(),
            ledger_entries: self.homes.total_ledger_entries(),
        }
    }

    fn ensure_cells_known(&mut self) {
        if self.ues.iter().any(|u| u.cells.len() < self.networks.len()) {
            self.broadcast_all();
            self.run_until_quiet();
        }
    }

    /// Registers UE `ue` with network `net` over 3GPP access and reports the
    /// AKA result.
    pub fn run_aka(&mut self, ue: usize, net: usize) -> Result<AkaSuccess, SimError> {
        self.run_aka_on(ue, net, AccessType::ThreeGpp)
    }

    pub fn run_aka_on(&mut self, ue: usize, net: usize, access: AccessType) -> Result<AkaSuccess, SimError> {
        self.ensure_cells_known();
        let cell = self.networks[net].node;
        let home_plmn = self.ues[ue].supi().plmn();
        let ledger_before = self.homes.get(&home_plmn).map_or(0, |h| h.ledger.len());
        let (auth_before, sync_before) = (self.ues[ue].auth_failures, self.ues[ue].sync_failures);
        self.ue_trigger(ue, UeTrigger::Register { cell, access });
        self.run_until_quiet();
        let u = &self.ues[ue];
        let conn = crate::protocol::ConnectionId { peer: cell, access };
        let resyncs = u.sync_failures - sync_before;
        match u.contexts.get(&conn).filter(|c| c.is_active() && !c.emergency) {
            Some(ctx) if u.phase == UePhase::Registered => {
                let ledger = &self.homes.get(&home_plmn).expect("home exists").ledger;
                let entry = ledger.get(ledger_before..).and_then(|new| new.last()).cloned();
                match entry {
                    Some(ledger_entry) => Ok(AkaSuccess { run_counter: ctx.run_counter, resyncs, ledger_entry }),
                    // registration update on an existing context: no new AKA run
                    None => Err(SimError::Setup("no authentication run took place".into())),
                }
            }
            _ if u.auth_failures > auth_before => Err(SimError::AuthFailure),
            _ if resyncs > 0 => Err(SimError::SyncFailure),
            _ => Err(SimError::AuthFailure),
        }
    }

    /// Registers one UE on one or two connections and returns the UE-side
    /// contexts in registration order.
    pub fn establish_contexts(&mut self, ue: usize, mode: ContextMode) -> Result<ContextLayout, SimError> {
        let plan: Vec<(usize, AccessType)> = match mode {
            ContextMode::Single => vec![(0, AccessType::ThreeGpp)],
            ContextMode::SamePlmnDual => vec![(0, AccessType::ThreeGpp), (0, AccessType::NonThreeGpp)],
            ContextMode::DistinctSn => {
                if self.networks.len() < 2 {
                    return Err(SimError::Setup("distinct-sn needs two serving networks".into()));
                }
                vec![(0, AccessType::ThreeGpp), (1, AccessType::NonThreeGpp)]
            }
        };
        self.ensure_cells_known();
        let mut contexts = Vec::new();
        for (net, access) in plan {
            let cell = self.networks[net].node;
            self.ue_trigger(ue, UeTrigger::Register { cell, access });
            self.run_until_quiet();
            let conn = crate::protocol::ConnectionId { peer: cell, access };
            let ctx: &SecurityContext = self.ues[ue]
                .contexts
                .get(&conn)
                .filter(|c| c.is_active() && self.ues[ue].phase == UePhase::Registered)
                .ok_or(SimError::NoActiveContext)?;
            contexts.push(ctx.clone());
        }
        Ok(ContextLayout { contexts })
    }

    /// Network-initiated handover of UE `ue` served by `net`.
    pub fn handover(&mut self, ue: usize, net: usize, target_cell: u32) -> Result<HandoverOutcome, SimError> {
        let ue_node = self.ues[ue].node;
        let conn = crate::protocol::ConnectionId { peer: self.networks[net].node, access: AccessType::ThreeGpp };
        let source = self.ues[ue]
            .contexts
            .get(&conn)
            .filter(|c| c.is_active())
            .and_then(|c| c.as_keys)
            .ok_or(SimError::NoActiveContext)?;
        let verdict = self.network_trigger(
            net,
            NetworkTrigger::Handover { ue: ue_node, access: AccessType::ThreeGpp, target_cell },
        );
        if verdict != DeliveryVerdict::Accepted {
            return Err(SimError::NoActiveContext);
        }
        let command_tick = self.transcript.last_tick();
        self.run_until_quiet();
        let target = self.ues[ue].contexts[&conn].as_keys.ok_or(SimError::NoActiveContext)?;
        Ok(HandoverOutcome {
            source_rrc_enc: source.rrc_enc.0.to_vec(),
            target_rrc_enc: target.rrc_enc.0.to_vec(),
            command_tick,
        })
    }
}

pub(crate) fn send_event(names: &BTreeMap<NodeId, String>, from: NodeId, to: NodeId, msg: &ProtocolMessage) -> Event {
    Event::Send {
        from: node_name(names, from),
        to: node_name(names, to),
        kind: msg.kind,
        protection: msg.protection_label(),
        wire: hex::encode(msg.encode()),
    }
}

fn deliver_event(from: String, to: String, msg: &ProtocolMessage, sent: u64, verdict: String) -> Event {
    Event::Deliver {
        from,
        to,
        kind: msg.kind,
        protection: msg.protection_label(),
        sent,
        verdict,
        wire: hex::encode(msg.encode()),
    }
}

pub(crate) fn node_name(names: &BTreeMap<NodeId, String>, node: NodeId) -> String {
    names.get(&node).cloned().unwrap_or_else(|| format!("node{}", node.0))
}

/// Transcript form of a step's node events, in emission order.
pub(crate) fn output_events(names: &BTreeMap<NodeId, String>, node: NodeId, out: &StepOutput) -> Vec<Event> {
    let me = node_name(names, node);
    out
        .events
        .iter()
        .map(|e| match e {
            NodeEvent::Phase(p) => Event::Phase { node: me.clone(), phase: p.clone() },
            NodeEvent::Context { peer, access, state } => Event::Context {
                node: me.clone(),
                peer: node_name(names, *peer),
                access: *access,
                state: *state,
            },
            NodeEvent::Anomaly(d) => Event::Anomaly { node: me.clone(), detail: d.clone() },
            NodeEvent::Audit(d) => Event::Audit { node: me.clone(), detail: d.clone() },
        })
        .collect()
}
