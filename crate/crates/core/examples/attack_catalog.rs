//! Run every attack against a hardened and an exposed configuration and
//! print the verdicts with their evidence lines.

use std::path::Path;

use fiveg_sim::adversary::execute_attack;
use fiveg_sim::identity::SuciScheme;
use fiveg_sim::{AttackKind, ScenarioConfig};

fn report(title: &str, config: &ScenarioConfig) {
    println!("{title}");
    for attack in AttackKind::ALL {
        let o = execute_attack(attack, config).unwrap();
        println!("  {:<22} {}", attack.id(), o.verdict.label());
        for e in o.evidence.iter().take(2) {
            println!("      line {:>3}: {}", e.line, e.detail);
        }
    }
}

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/scenarios/baseline.toml");
    let hardened = ScenarioConfig::load(&path).unwrap();
    report("hardened", &hardened);

    let mut exposed = hardened.clone();
    exposed.knobs.suci_scheme = SuciScheme::Null;
    exposed.knobs.ca_mode = false;
    exposed.knobs.unauthenticated_emergency_allowed = true;
    exposed.knobs.capability_echo = false;
    report("exposed", &exposed);
}
