//! UE and network state machines.
//!
//! Both sides are plain values stepped by the simulation loop: one input
//! (a delivered message or a local trigger) produces a [`StepOutput`] with a
//! delivery verdict, outgoing messages and observable events. The serving
//! network's SEAF, AMF and SMF roles live in one [`NetworkState`] as
//! role-tagged sub-records; home networks (ARPF/AUSF) sit behind the
//! [`HomeDirectory`] backbone.

pub mod context;
pub mod home;
pub mod message;
pub mod network;
pub mod ue;
pub mod up;

use serde::{Deserialize, Serialize};

pub use context::{ConnectionId, ContextLayout, ContextState, SecurityContext};
pub use home::{AuthVector, ConfirmationEntry, HomeDirectory, HomeError, HomeNetwork};
pub use message::{
    verify_preauth_signature, AccessType, AuthAnswer, AuthMethod, Body, CellInfo, MessageKind, MobileIdentity,
    NodeId, Payload, ProtocolMessage, RejectCause, SignatureVerdict,
};
pub use network::{HandoverSecurity, NetworkConfig, NetworkState, NetworkTrigger};
pub use ue::{SuciSetting, UeConfig, UePhase, UeState, UeTrigger};
pub use up::{apply_up_policy, DrbConfig, PduSession, PolicyOrigin, Requirement, UpSecurityPolicy};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Address {
    Node(NodeId),
    /// Every UE in radio range.
    Broadcast,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outgoing {
    pub to: Address,
    pub msg: ProtocolMessage,
}

/// What the receiver did with a delivered message (or a trigger).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeliveryVerdict {
    Accepted,
    /// Processed and refused by the protocol (e.g. a failed AUTN check).
    Rejected(String),
    /// Discarded before acting on it; state is untouched.
    Dropped(String),
}

impl DeliveryVerdict {
    pub fn label(&self) -> String {
        match self {
            DeliveryVerdict::Accepted => "accepted".to_string(),
            DeliveryVerdict::Rejected(r) => format!("rejected:{r}"),
            DeliveryVerdict::Dropped(r) => format!("dropped:{r}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeEvent {
    Phase(String),
    Context { peer: NodeId, access: AccessType, state: ContextState },
    Anomaly(String),
    Audit(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutput {
    pub verdict: DeliveryVerdict,
    pub outgoing: Vec<Outgoing>,
    pub events: Vec<NodeEvent>,
}

impl StepOutput {
    pub fn dropped(reason: impl Into<String>) -> Self {
        Self { verdict: DeliveryVerdict::Dropped(reason.into()), outgoing: Vec::new(), events: Vec::new() }
    }

    fn accepted() -> Self {
        Self { verdict: DeliveryVerdict::Accepted, outgoing: Vec::new(), events: Vec::new() }
    }

    fn send(&mut self, to: NodeId, msg: ProtocolMessage) {
        self.outgoing.push(Outgoing { to: Address::Node(to), msg });
    }
}
