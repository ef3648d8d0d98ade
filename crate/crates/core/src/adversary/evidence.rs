//! Verdict extraction from a finished transcript.

use serde::{Deserialize, Serialize};

use crate::protocol::{MessageKind, ProtocolMessage};
use crate::simcore::channel::{Event, Transcript};

use super::sniffer::sniff;
use super::{AttackKind, Verdict};

/// One transcript line backing a verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    /// Tick, which is also the 1-based transcript line.
    pub line: u64,
    pub detail: String,
}

fn hex_contains(hex_bytes: &str, needle: &[u8]) -> bool {
    hex::decode(hex_bytes).is_ok_and(|b| b.windows(needle.len()).any(|w| w == needle))
}

fn msin_in<'a>(bytes_hex: &str, msins: &'a [String]) -> Option<&'a String> {
    msins.iter().find(|m| hex_contains(bytes_hex, m.as_bytes()))
}

/// Scans `transcript` for the condition that makes `kind` succeed.
pub fn evaluate(kind: AttackKind, transcript: &Transcript, msins: &[String], rogue: &str) -> (Verdict, Vec<Evidence>) {
    let mut evidence = Vec::new();
    match kind {
        AttackKind::SupiCatchPassive | AttackKind::EmergencySupiCatch => {
            for r in &transcript.records {
                let Event::Observe { kind: k, readable: Some(readable), protection, from, to, .. } = &r.event else {
                    continue;
                };
                if kind == AttackKind::EmergencySupiCatch && *k != MessageKind::EmergencyRequest {
                    continue;
                }
                if let Some(m) = msin_in(readable, msins) {
                    evidence.push(Evidence {
                        line: r.tick,
                        detail: format!("msin {m} readable in {protection} {k} {from}->{to}"),
                    });
                }
            }
        }
        AttackKind::SupiCatchActive => {
            for r in &transcript.records {
                let Event::Deliver { to, from, kind: k, wire, verdict, .. } = &r.event else { continue };
                if to != rogue || verdict != "accepted" {
                    continue;
                }
                let Ok(msg) = hex::decode(wire).map_err(|_| ()).and_then(|b| ProtocolMessage::decode(&b).map_err(|_| ()))
                else {
                    continue;
                };
                let obs = sniff(&msg);
                if let Some(m) = msins.iter().find(|m| obs.contains(m.as_bytes())) {
                    evidence.push(Evidence { line: r.tick, detail: format!("rogue received msin {m} in {k} from {from}") });
                }
            }
        }
        AttackKind::PreauthDosReject | AttackKind::SilentDowngrade => {
            let (target_phase, kinds): (&str, &[MessageKind]) = if kind == AttackKind::PreauthDosReject {
                ("denied", &[MessageKind::RegistrationReject, MessageKind::TauReject])
            } else {
                ("legacy-attached", &[MessageKind::DowngradeCommand])
            };
            for r in &transcript.records {
                let Event::Phase { node, phase } = &r.event else { continue };
                if phase != target_phase {
                    continue;
                }
                let Some(cause) = r.cause.and_then(|c| transcript.get(c)) else { continue };
                if let Event::Deliver { from, to, kind: k, verdict, .. } = &cause.event {
                    if from == rogue && to == node && kinds.contains(k) && verdict == "accepted" {
                        evidence.push(Evidence { line: cause.tick, detail: format!("{node} accepted {k} from {from}") });
                        evidence.push(Evidence { line: r.tick, detail: format!("{node} entered {phase}") });
                    }
                }
            }
        }
        AttackKind::BiddingDown => {
            let mutated: Vec<_> = transcript
                .records
                .iter()
                .filter_map(|r| match &r.event {
                    Event::Mutate { from, kind: MessageKind::RegistrationRequest, .. } => Some((r.tick, from.clone())),
                    _ => None,
                })
                .collect();
            for r in &transcript.records {
                let Event::Deliver { to, kind: MessageKind::RegistrationAccept, protection, verdict, .. } = &r.event
                else {
                    continue;
                };
                if verdict != "accepted" || !protection.starts_with("NEA0/") {
                    continue;
                }
                if let Some((line, ue)) = mutated.iter().find(|(t, ue)| *t < r.tick && ue == to) {
                    evidence.push(Evidence { line: *line, detail: format!("capabilities of {ue} stripped in transit") });
                    evidence.push(Evidence { line: r.tick, detail: format!("{to} registered under {protection}") });
                }
            }
        }
    }
    evidence.sort_by_key(|e| e.line);
    let verdict = if evidence.is_empty() { Verdict::Fail } else { Verdict::Success };
    (verdict, evidence)
}
