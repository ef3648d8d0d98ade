//! Passive observation: what a radio sniffer can read off one message.

use serde::{Deserialize, Serialize};

use crate::crypto_suite::{AlgorithmId, ProtectionEnvelope};
use crate::protocol::{MessageKind, Payload, ProtocolMessage};

/// Visible header of a protected message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvelopeMeta {
    pub cipher: AlgorithmId,
    pub integrity: AlgorithmId,
    pub count: u32,
    pub length: usize,
}

impl EnvelopeMeta {
    fn of(env: &ProtectionEnvelope) -> Self {
        Self { cipher: env.cipher_alg, integrity: env.integrity_alg, count: env.count, length: env.payload.len() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub kind: MessageKind,
    pub protection: String,
    /// Body bytes the sniffer can read: the whole body for CLEAR messages and
    /// NEA0 envelopes, nothing otherwise.
    pub readable: Option<Vec<u8>>,
    pub meta: Option<EnvelopeMeta>,
}

impl Observation {
    pub fn contains(&self, needle: &[u8]) -> bool {
        self.readable.as_ref().is_some_and(|r| r.windows(needle.len()).any(|w| w == needle))
    }
}

pub fn sniff(msg: &ProtocolMessage) -> Observation {
    let protection = msg.protection_label();
    match &msg.payload {
        Payload::Clear(body) => Observation { kind: msg.kind, protection, readable: Some(body.encode()), meta: None },
        Payload::Protected(env) => Observation {
            kind: msg.kind,
            protection,
            readable: (env.cipher_alg == AlgorithmId::Nea0).then(|| env.payload.clone()),
            meta: Some(EnvelopeMeta::of(env)),
        },
    }
}
