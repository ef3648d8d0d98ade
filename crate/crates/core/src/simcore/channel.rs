//! Transcript: the append-only, line-delimited event log of one run.
//!
//! Every record takes the next logical tick, so ticks strictly increase and a
//! record's tick equals its 1-based line number in the JSONL file. Records
//! produced while handling a delivery or trigger name that record's tick as
//! their `cause`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::adversary::EnvelopeMeta;
use crate::protocol::{AccessType, ContextState, MessageKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Trigger {
        node: String,
        trigger: serde_json::Value,
    },
    Send {
        from: String,
        to: String,
        kind: MessageKind,
        protection: String,
        wire: String,
    },
    /// What the sniffer reads off a message in flight.
    Observe {
        by: String,
        from: String,
        to: String,
        kind: MessageKind,
        protection: String,
        readable: Option<String>,
        meta: Option<EnvelopeMeta>,
    },
    Mutate {
        by: String,
        from: String,
        to: String,
        kind: MessageKind,
        before: String,
        after: String,
    },
    Drop {
        by: String,
        from: String,
        to: String,
        kind: MessageKind,
    },
    Deliver {
        from: String,
        to: String,
        kind: MessageKind,
        protection: String,
        sent: u64,
        verdict: String,
        wire: String,
    },
    Phase {
        node: String,
        phase: String,
    },
    Context {
        node: String,
        peer: String,
        access: AccessType,
        state: ContextState,
    },
    Anomaly {
        node: String,
        detail: String,
    },
    Audit {
        node: String,
        detail: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub tick: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<u64>,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Error)]
#[error("transcript line {line}: {message}")]
pub struct TranscriptError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    pub records: Vec<Record>,
}

impl Transcript {
    /// Appends `event` and returns its tick.
    pub fn push(&mut self, event: Event, cause: Option<u64>) -> u64 {
        let tick = self.records.len() as u64 + 1;
        self.records.push(Record { tick, cause, event });
        tick
    }

    pub fn last_tick(&self) -> u64 {
        self.records.len() as u64
    }

    pub fn get(&self, tick: u64) -> Option<&Record> {
        tick.checked_sub(1).and_then(|i| self.records.get(i as usize))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TranscriptError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r: Record =
                serde_json::from_str(line).map_err(|e| TranscriptError { line: i + 1, message: e.to_string() })?;
            records.push(r);
        }
        Ok(Self { records })
    }

    /// Hex SHA-256 of the JSONL form.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_jsonl().as_bytes()))
    }

    /// Records caused by the record at `tick`.
    pub fn caused_by(&self, tick: u64) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(move |r| r.cause == Some(tick))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phase(p: &str) -> Event {
        Event::Phase { node: "ue0".into(), phase: p.into() }
    }

    #[test]
    fn ticks_are_line_numbers() {
        let mut t = Transcript::default();
        let a = t.push(phase("registering"), None);
        let b = t.push(phase("registered"), Some(a));
        assert_eq!((a, b), (1, 2));
        let text = t.to_jsonl();
        assert_eq!(text.lines().nth(1).unwrap(), r#"{"tick":2,"cause":1,"event":"phase","node":"ue0","phase":"registered"}"#);
        assert_eq!(Transcript::from_jsonl(&text).unwrap(), t);
        assert_eq!(t.caused_by(1).count(), 1);
        assert!(t.get(0).is_none() && t.get(3).is_none());
    }

    #[test]
    fn bad_line_reported_by_number() {
        let err = Transcript::from_jsonl("{\"tick\":1,\"event\":\"phase\",\"node\":\"a\",\"phase\":\"b\"}\nnot json\n").unwrap_err();
        assert_eq!(err.line, 2);
    }
}
