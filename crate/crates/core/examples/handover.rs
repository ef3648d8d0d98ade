//! Handover under both security settings: the access-stratum key changes
//! only when the target key is re-derived.

use std::path::Path;

use fiveg_sim::protocol::HandoverSecurity;
use fiveg_sim::{ScenarioConfig, Simulation};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/scenarios/baseline.toml");
    let mut config = ScenarioConfig::load(&path).unwrap();
    for mode in [HandoverSecurity::Secure, HandoverSecurity::Insecure] {
        config.knobs.handover_security = mode;
        let mut sim = Simulation::new(&config).unwrap();
        sim.run_aka(0, 0).unwrap();
        let o = sim.handover(0, 0, 9).unwrap();
        println!("{mode:?}: command at line {}", o.command_tick);
        println!("  source rrc_enc {}", hex::encode(&o.source_rrc_enc));
        println!("  target rrc_enc {}", hex::encode(&o.target_rrc_enc));
    }
}
