//! Run the shipped baseline without attacks and print the transcript.

use std::path::Path;

use fiveg_sim::simcore::Event;
use fiveg_sim::{ScenarioConfig, Simulation};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/scenarios/baseline.toml");
    let config = ScenarioConfig::load(&path).expect("baseline loads");
    let mut sim = Simulation::new(&config).unwrap();
    sim.run_benign();

    for r in &sim.transcript.records {
        match &r.event {
            Event::Phase { node, phase } => println!("line {:>3} {node} {phase}", r.tick),
            Event::Context { node, peer, state, .. } => println!("line {:>3} {node} context with {peer} {state:?}", r.tick),
            _ => {}
        }
    }
    let states = sim.final_states();
    println!("phases {:?}", states.ue_phases);
    println!("home ledger entries {}", states.ledger_entries);
    println!("transcript sha256 {}", sim.transcript.digest());
}
