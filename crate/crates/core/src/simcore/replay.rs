//! Transcript replay.
//!
//! Rebuilds every legitimate node from the scenario alone, re-feeds the
//! recorded triggers and deliveries, and checks that each node produced
//! exactly the events and sends the transcript attributes to it. Attacker
//! records are not re-executed; they are only checked for consistency with
//! the sends they claim to act on.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::protocol::{NodeId, ProtocolMessage};

use super::channel::{Event, Record, Transcript};
use super::scenario::{ScenarioConfig, ScenarioError};
use super::sim::{output_events, send_event, Nodes, Simulation, Trigger};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayStats {
    pub records: usize,
    pub replayed_steps: usize,
    pub attacker_records: usize,
}

#[derive(Debug, Error)]
pub enum ReplayMismatch {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("line {line}: tick {tick} out of sequence")]
    Tick { line: usize, tick: u64 },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: replay diverged: {message}")]
    Diverged { line: u64, message: String },
}

fn malformed(line: u64, message: impl Into<String>) -> ReplayMismatch {
    ReplayMismatch::Malformed { line, message: message.into() }
}

fn diverged(line: u64, message: impl Into<String>) -> ReplayMismatch {
    ReplayMismatch::Diverged { line, message: message.into() }
}

fn is_node_output(e: &Event) -> bool {
    matches!(
        e,
        Event::Send { .. } | Event::Phase { .. } | Event::Context { .. } | Event::Anomaly { .. } | Event::Audit { .. }
    )
}

/// Replays `transcript` against fresh nodes built from `config`.
pub fn verify_transcript(config: &ScenarioConfig, transcript: &Transcript) -> Result<ReplayStats, ReplayMismatch> {
    config.validate()?;
    let names = Simulation::name_map(config);
    let ids: BTreeMap<&str, NodeId> = names.iter().map(|(id, n)| (n.as_str(), *id)).collect();
    let mut nodes = Nodes::build(config);
    let ue_nodes: Vec<NodeId> = nodes.ues.iter().map(|u| u.node).collect();

    for (i, r) in transcript.records.iter().enumerate() {
        if r.tick != i as u64 + 1 {
            return Err(ReplayMismatch::Tick { line: i + 1, tick: r.tick });
        }
        if r.cause.is_some_and(|c| c >= r.tick) {
            return Err(malformed(r.tick, "cause does not precede record"));
        }
    }
    let mut children: BTreeMap<u64, Vec<&Record>> = BTreeMap::new();
    for r in &transcript.records {
        if let Some(c) = r.cause {
            children.entry(c).or_default().push(r);
        }
    }
    let node_id = |line: u64, name: &str| ids.get(name).copied().ok_or_else(|| malformed(line, format!("unknown node {name}")));

    let mut stats = ReplayStats { records: transcript.records.len(), replayed_steps: 0, attacker_records: 0 };
    for r in &transcript.records {
        let produced = match &r.event {
            Event::Trigger { node, trigger } => {
                let id = node_id(r.tick, node)?;
                let t: Trigger = serde_json::from_value(trigger.clone()).map_err(|e| malformed(r.tick, e.to_string()))?;
                if id == Simulation::ROGUE_NODE {
                    stats.attacker_records += 1;
                    continue;
                }
                nodes.apply_trigger(id, &t).ok_or_else(|| diverged(r.tick, format!("{node} rejects trigger")))?
            }
            Event::Deliver { from, to, kind, sent, verdict, wire, .. } => {
                check_delivery_source(transcript, r, *sent, from, to, *kind, wire)?;
                let (from_id, to_id) = (node_id(r.tick, from)?, node_id(r.tick, to)?);
                if to_id == Simulation::ROGUE_NODE {
                    stats.attacker_records += 1;
                    continue;
                }
                let bytes = hex::decode(wire).map_err(|e| malformed(r.tick, e.to_string()))?;
                let msg = ProtocolMessage::decode(&bytes).map_err(|e| malformed(r.tick, e.to_string()))?;
                let out = nodes
                    .apply_delivery(from_id, to_id, &msg)
                    .ok_or_else(|| malformed(r.tick, format!("no node {to}")))?;
                if out.verdict.label() != *verdict {
                    return Err(diverged(r.tick, format!("verdict {} but transcript says {verdict}", out.verdict.label())));
                }
                out
            }
            Event::Observe { .. } | Event::Mutate { .. } | Event::Drop { .. } => {
                stats.attacker_records += 1;
                continue;
            }
            _ => continue,
        };
        stats.replayed_steps += 1;

        let (Event::Trigger { node, .. } | Event::Deliver { to: node, .. }) = &r.event else { unreachable!() };
        let id = ids[node.as_str()];
        let mut expected = output_events(&names, id, &produced);
        for o in &produced.outgoing {
            let targets = match o.to {
                crate::protocol::Address::Node(n) => vec![n],
                crate::protocol::Address::Broadcast => ue_nodes.clone(),
            };
            for to in targets {
                expected.push(send_event(&names, id, to, &o.msg));
            }
        }
        let recorded: Vec<&Record> =
            children.get(&r.tick).map(|v| v.iter().copied().filter(|c| is_node_output(&c.event)).collect()).unwrap_or_default();
        if recorded.len() != expected.len() {
            return Err(diverged(
                r.tick,
                format!("{node} produced {} outputs, transcript records {}", expected.len(), recorded.len()),
            ));
        }
        for (want, got) in expected.iter().zip(recorded) {
            if *want != got.event {
                return Err(diverged(got.tick, format!("{node} output differs from the recorded one")));
            }
        }
    }
    Ok(stats)
}

/// The delivered bytes must be the sent bytes, or the result of a recorded
/// in-transit mutation of that send.
fn check_delivery_source(
    transcript: &Transcript,
    r: &Record,
    sent: u64,
    from: &str,
    to: &str,
    kind: crate::protocol::MessageKind,
    wire: &str,
) -> Result<(), ReplayMismatch> {
    let Some(Record { event: Event::Send { from: sf, to: st, kind: sk, wire: sw, .. }, .. }) = transcript.get(sent)
    else {
        return Err(malformed(r.tick, format!("sent tick {sent} is not a send")));
    };
    if sf != from || st != to || *sk != kind {
        return Err(malformed(r.tick, "delivery does not match its send"));
    }
    if sw == wire {
        return Ok(());
    }
    let mutated = transcript.caused_by(sent).any(|m| {
        matches!(&m.event, Event::Mutate { before, after, .. } if before == sw && after == wire) && m.tick < r.tick
    });
    if mutated {
        Ok(())
    } else {
        Err(malformed(r.tick, "delivered bytes differ from the send with no recorded mutation"))
    }
}
