//! Verify an attack transcript by replay, then edit one line and verify
//! again.

use std::path::Path;

use fiveg_sim::adversary::execute_attack;
use fiveg_sim::simcore::{verify_transcript, Transcript};
use fiveg_sim::{AttackKind, ScenarioConfig};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/scenarios/baseline.toml");
    let config = ScenarioConfig::load(&path).unwrap();
    let o = execute_attack(AttackKind::BiddingDown, &config).unwrap();
    let text = o.transcript.to_jsonl();
    println!("original: {:?}", verify_transcript(&config, &Transcript::from_jsonl(&text).unwrap()));

    let edited = text.replacen("\"accepted\"", "\"rejected\"", 1);
    println!("edited:   {:?}", verify_transcript(&config, &Transcript::from_jsonl(&edited).unwrap()));
}
