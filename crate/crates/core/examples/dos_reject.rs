//! Forged pre-authentication rejects, accepted without CA mode and
//! discarded once the UE checks the sender's certificate chain.

use std::path::Path;

use fiveg_sim::adversary::execute_attack;
use fiveg_sim::simcore::Event;
use fiveg_sim::{AttackKind, ScenarioConfig};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/scenarios/baseline.toml");
    let mut config = ScenarioConfig::load(&path).unwrap();
    for ca in [false, true] {
        config.knobs.ca_mode = ca;
        let o = execute_attack(AttackKind::PreauthDosReject, &config).unwrap();
        println!("ca_mode = {ca}: {}", o.verdict.label());
        for r in &o.transcript.records {
            if let Event::Deliver { from, to, kind, verdict, .. } = &r.event {
                if from == "rogue" {
                    println!("  line {:>3} {from} -> {to} {kind} {verdict}", r.tick);
                }
            }
        }
    }
}
