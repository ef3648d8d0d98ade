//! Attacker capability model and the attack catalog.
//!
//! The attacker is Dolev-Yao without key compromise: it sees and rewrites
//! traffic within its capabilities but never holds a subscriber root key or a
//! home network private key. Verdicts are computed from the transcript after
//! the run, never asserted by the attacker itself.

pub mod evidence;
pub mod rogue;
pub mod sniffer;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{AccessType, NodeId, UeTrigger};
use crate::simcore::channel::Transcript;
use crate::simcore::scenario::{ScenarioConfig, ScenarioError};
use crate::simcore::sim::Simulation;

pub use evidence::{evaluate, Evidence};
pub use rogue::Attacker;
pub use sniffer::{sniff, EnvelopeMeta, Observation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackerCapabilities {
    pub can_sniff: bool,
    pub can_inject_preauth: bool,
    pub can_broadcast: bool,
    pub can_mutate_in_transit: bool,
}

impl AttackerCapabilities {
    pub const ALL: AttackerCapabilities =
        AttackerCapabilities { can_sniff: true, can_inject_preauth: true, can_broadcast: true, can_mutate_in_transit: true };

    /// Fixed: the model has no key-compromise attacker.
    pub fn knows_root_keys(&self) -> bool {
        false
    }

    pub fn any(&self) -> bool {
        self.can_sniff || self.can_inject_preauth || self.can_broadcast || self.can_mutate_in_transit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    SupiCatchPassive,
    SupiCatchActive,
    PreauthDosReject,
    SilentDowngrade,
    BiddingDown,
    EmergencySupiCatch,
}

impl AttackKind {
    pub const ALL: [AttackKind; 6] = [
        AttackKind::SupiCatchPassive,
        AttackKind::SupiCatchActive,
        AttackKind::PreauthDosReject,
        AttackKind::SilentDowngrade,
        AttackKind::BiddingDown,
        AttackKind::EmergencySupiCatch,
    ];

    /// Stable catalog id used in scenario files and reports.
    pub fn id(self) -> &'static str {
        match self {
            AttackKind::SupiCatchPassive => "supi_catch_passive",
            AttackKind::SupiCatchActive => "supi_catch_active",
            AttackKind::PreauthDosReject => "preauth_dos_reject",
            AttackKind::SilentDowngrade => "silent_downgrade",
            AttackKind::BiddingDown => "bidding_down",
            AttackKind::EmergencySupiCatch => "emergency_supi_catch",
        }
    }

    /// Exploit-table row this attack reproduces.
    pub fn row_id(self) -> &'static str {
        match self {
            AttackKind::SupiCatchPassive | AttackKind::SupiCatchActive | AttackKind::EmergencySupiCatch => "T3R1",
            AttackKind::PreauthDosReject => "T3R2",
            AttackKind::SilentDowngrade => "T3R3",
            AttackKind::BiddingDown => "T1-bidding",
        }
    }

    /// Capabilities the scripted behavior needs, by field name.
    pub fn missing_capabilities(self, caps: &AttackerCapabilities) -> Vec<&'static str> {
        let needed: &[(&str, bool)] = match self {
            AttackKind::SupiCatchPassive | AttackKind::EmergencySupiCatch => &[("can_sniff", caps.can_sniff)],
            AttackKind::SupiCatchActive | AttackKind::PreauthDosReject | AttackKind::SilentDowngrade => {
                &[("can_broadcast", caps.can_broadcast), ("can_inject_preauth", caps.can_inject_preauth)]
            }
            AttackKind::BiddingDown => &[("can_mutate_in_transit", caps.can_mutate_in_transit)],
        };
        needed.iter().filter(|(_, have)| !have).map(|(n, _)| *n).collect()
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for AttackKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AttackKind::ALL.into_iter().find(|k| k.id() == s).ok_or_else(|| format!("unknown attack {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "SUCCESS")]
    Success,
    #[serde(rename = "FAIL")]
    Fail,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Success => "SUCCESS",
            Verdict::Fail => "FAIL",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Verdict {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "SUCCESS" => Ok(Verdict::Success),
            "FAIL" => Ok(Verdict::Fail),
            _ => Err(format!("unknown verdict {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    pub attack: AttackKind,
    pub config_fingerprint: String,
    pub verdict: Verdict,
    /// Non-empty whenever the verdict is SUCCESS.
    pub evidence: Vec<Evidence>,
    pub transcript: Transcript,
}

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("attack {attack} needs {missing:?}, which the scenario's attacker lacks")]
    UnsupportedAttackForConfig { attack: AttackKind, missing: Vec<&'static str> },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// Runs one scripted attack against a fresh simulation of `scenario`.
pub fn execute_attack(kind: AttackKind, scenario: &ScenarioConfig) -> Result<AttackOutcome, AttackError> {
    let missing = kind.missing_capabilities(&scenario.attacker.capabilities());
    if !missing.is_empty() {
        return Err(AttackError::UnsupportedAttackForConfig { attack: kind, missing });
    }
    let mut sim = Simulation::with_attack(scenario, Some(kind))?;
    run_script(kind, &mut sim);
    let (verdict, evidence) = evaluate(kind, &sim.transcript, &sim.subscriber_msins(), Simulation::ROGUE_NAME);
    Ok(AttackOutcome {
        attack: kind,
        config_fingerprint: scenario.fingerprint(),
        verdict,
        evidence,
        transcript: sim.transcript,
    })
}

/// The scripted sequence of events for each attack.
pub fn run_script(kind: AttackKind, sim: &mut Simulation) {
    let ues = sim.ues.len();
    match kind {
        AttackKind::SupiCatchPassive | AttackKind::BiddingDown => {
            sim.broadcast_all();
            sim.run_until_quiet();
            for ue in 0..ues {
                sim.ue_trigger(ue, UeTrigger::PowerOn);
            }
            sim.run_until_quiet();
        }
        AttackKind::EmergencySupiCatch => {
            sim.broadcast_all();
            sim.run_until_quiet();
            for ue in 0..ues {
                sim.ue_trigger(ue, UeTrigger::PowerOn);
            }
            sim.run_until_quiet();
            // maliciously triggered emergency call
            for ue in 0..ues {
                sim.ue_trigger(ue, UeTrigger::EmergencyCall { unauthenticated: true });
            }
            sim.run_until_quiet();
        }
        AttackKind::SupiCatchActive => {
            sim.broadcast_all();
            sim.run_until_quiet();
            for ue in 0..ues {
                sim.ue_trigger(ue, UeTrigger::PowerOn);
            }
            sim.run_until_quiet();
            sim.rogue_broadcast();
            sim.run_until_quiet();
            for ue in 0..ues {
                sim.ue_trigger(ue, UeTrigger::Reselect);
            }
            sim.run_until_quiet();
        }
        AttackKind::PreauthDosReject | AttackKind::SilentDowngrade => {
            sim.broadcast_all();
            sim.rogue_broadcast();
            sim.run_until_quiet();
            if kind == AttackKind::PreauthDosReject {
                // unsolicited reject aimed at every UE before it registers
                for ue in 0..ues {
                    let to = sim.ues[ue].node;
                    sim.rogue_inject_reject(to, AccessType::ThreeGpp);
                }
                sim.run_until_quiet();
            }
            for ue in 0..ues {
                sim.ue_trigger(ue, UeTrigger::PowerOn);
            }
            sim.run_until_quiet();
        }
    }
}

/// Nodes that answered as a network but are attacker-controlled.
pub fn attacker_nodes() -> [NodeId; 1] {
    [Simulation::ROGUE_NODE]
}
