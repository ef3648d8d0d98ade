//! One UE registered over one or two connections, and the key material
//! the resulting contexts share.

use std::path::Path;

use fiveg_sim::simcore::sim::ContextMode;
use fiveg_sim::{ScenarioConfig, Simulation};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/scenarios/baseline.toml");
    let mut config = ScenarioConfig::load(&path).unwrap();
    config.attacker.can_sniff = false;
    config.attacker.can_inject_preauth = false;
    config.attacker.can_broadcast = false;
    config.attacker.can_mutate_in_transit = false;
    config.subscribers[0].provisioned_networks.push("001-02".parse().unwrap());

    for mode in [ContextMode::Single, ContextMode::DistinctSn, ContextMode::SamePlmnDual] {
        let mut sim = Simulation::new(&config).unwrap();
        let layout = sim.establish_contexts(0, mode).unwrap();
        println!("{mode:?}: {} context(s)", layout.contexts.len());
        for c in &layout.contexts {
            println!("  {:?} via {} state {}", c.connection.access, c.serving_network, c.state.label());
        }
        if layout.contexts.len() == 2 {
            println!("  shared key values {}", layout.shared_key_values(0, 1));
            println!("  NAS keys equal {}", layout.nas_keys_equal(0, 1));
        }
    }
}
