//! Run reports.
//!
//! A report lists the scenario fingerprint, the effective seed, the knob
//! settings, and one verdict line per attack. Each verdict line points at
//! the transcript file and line numbers backing it. Nothing in a report
//! depends on wall-clock time, so equal inputs give byte-identical reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::adversary::{execute_attack, AttackError, AttackKind, Evidence};
use crate::simcore::{ScenarioConfig, ScenarioError, Simulation, Transcript};

pub const BENIGN_TRANSCRIPT: &str = "transcript.jsonl";

pub fn attack_transcript_name(attack: AttackKind) -> String {
    format!("transcript-{}.jsonl", attack.id())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictLine {
    /// Stable cross-reference id (`T3R1`, `T3R2`, `T3R3`, `T1-bidding`).
    pub row_id: String,
    pub attack: AttackKind,
    /// `SUCCESS`, `FAIL` or `UNSUPPORTED`.
    pub verdict: String,
    pub transcript: String,
    /// Lines backing a SUCCESS. Empty for FAIL: the whole transcript was
    /// scanned and `scanned_through` names its last line.
    pub evidence: Vec<Evidence>,
    pub scanned_through: u64,
    /// Missing attacker capabilities for UNSUPPORTED lines.
    pub missing: Vec<String>,
}

impl VerdictLine {
    /// `file:line[,line…]` or `file:1-N` when nothing matched.
    pub fn location(&self) -> String {
        if self.evidence.is_empty() {
            if self.scanned_through == 0 {
                format!("{} (not run)", self.transcript)
            } else {
                format!("{}:1-{}", self.transcript, self.scanned_through)
            }
        } else {
            let lines: Vec<String> = self.evidence.iter().map(|e| e.line.to_string()).collect();
            format!("{}:{}", self.transcript, lines.join(","))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubscriberLine {
    pub supi: String,
    pub final_phase: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub fingerprint: String,
    pub seed: u64,
    pub seed_overridden: bool,
    pub knobs: Vec<(String, String)>,
    pub subscribers: Vec<SubscriberLine>,
    pub benign_transcript: String,
    pub benign_final_tick: u64,
    pub transcript_digest: String,
    pub verdicts: Vec<VerdictLine>,
}

/// A finished run: the report and every transcript it references.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub report: Report,
    pub transcripts: Vec<(String, Transcript)>,
}

/// Runs the benign procedure and every listed attack, then assembles the
/// report. `seed_overridden` only affects how the seed is annotated.
pub fn generate(config: &ScenarioConfig, seed_overridden: bool) -> Result<RunArtifacts, ScenarioError> {
    let mut sim = Simulation::new(config)?;
    sim.run_benign();
    let states = sim.final_states();
    let subscribers = config
        .subscribers
        .iter()
        .zip(&states.ue_phases)
        .map(|(s, p)| SubscriberLine { supi: s.supi.to_string(), final_phase: p.clone() })
        .collect();
    let benign = sim.transcript;
    let mut transcripts = vec![(BENIGN_TRANSCRIPT.to_string(), benign.clone())];
    let mut verdicts = Vec::new();
    for &attack in &config.attacks {
        let file = attack_transcript_name(attack);
        let line = match execute_attack(attack, config) {
            Ok(o) => {
                let scanned = o.transcript.last_tick();
                transcripts.push((file.clone(), o.transcript));
                VerdictLine {
                    row_id: attack.row_id().into(),
                    attack,
                    verdict: o.verdict.label().into(),
                    transcript: file,
                    evidence: o.evidence,
                    scanned_through: scanned,
                    missing: Vec::new(),
                }
            }
            Err(AttackError::UnsupportedAttackForConfig { missing, .. }) => VerdictLine {
                row_id: attack.row_id().into(),
                attack,
                verdict: "UNSUPPORTED".into(),
                transcript: file,
                evidence: Vec::new(),
                scanned_through: 0,
                missing: missing.into_iter().map(str::to_string).collect(),
            },
            Err(AttackError::Scenario(e)) => return Err(e),
        };
        verdicts.push(line);
    }
    let report = Report {
        scenario: config.name.clone(),
        fingerprint: config.fingerprint(),
        seed: config.seed,
        seed_overridden,
        knobs: config.knob_summary(),
        subscribers,
        benign_transcript: BENIGN_TRANSCRIPT.into(),
        benign_final_tick: benign.last_tick(),
        transcript_digest: benign.digest(),
        verdicts,
    };
    Ok(RunArtifacts { report, transcripts })
}

impl Report {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario     {}", self.scenario);
        let _ = writeln!(s, "fingerprint  {}", self.fingerprint);
        let note = if self.seed_overridden { " (overridden on the command line)" } else { "" };
        let _ = writeln!(s, "seed         {}{note}", self.seed);
        let _ = writeln!(s, "benign run   {} ticks, {} sha256 {}", self.benign_final_tick, self.benign_transcript, self.transcript_digest);
        let _ = writeln!(s);
        let _ = writeln!(s, "knobs");
        for (k, v) in &self.knobs {
            let _ = writeln!(s, "  {k} = {v}");
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "subscribers");
        for sub in &self.subscribers {
            let _ = writeln!(s, "  {} {}", sub.supi, sub.final_phase);
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "verdicts");
        for v in &self.verdicts {
            let _ = writeln!(s, "  [{}] {} {} @ {}", v.row_id, v.attack, v.verdict, v.location());
            for e in &v.evidence {
                let _ = writeln!(s, "      {}:{} {}", v.transcript, e.line, e.detail);
            }
            if !v.missing.is_empty() {
                let _ = writeln!(s, "      attacker lacks {}", v.missing.join(", "));
            }
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}
