//! A passive sniffer next to a registration, with and without concealment.

use std::path::Path;

use fiveg_sim::adversary::execute_attack;
use fiveg_sim::identity::SuciScheme;
use fiveg_sim::simcore::Event;
use fiveg_sim::{AttackKind, ScenarioConfig};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/scenarios/baseline.toml");
    let mut config = ScenarioConfig::load(&path).unwrap();
    for scheme in [SuciScheme::ProbabilisticPk, SuciScheme::Null] {
        config.knobs.suci_scheme = scheme;
        let o = execute_attack(AttackKind::SupiCatchPassive, &config).unwrap();
        println!("suci_scheme = {scheme}: {}", o.verdict.label());
        let msins = config.subscribers.iter().map(|s| s.supi.msin().to_string());
        for msin in msins {
            let seen = o.transcript.records.iter().find(|r| match &r.event {
                Event::Observe { readable: Some(text), .. } => {
                    hex::decode(text).unwrap().windows(msin.len()).any(|w| w == msin.as_bytes())
                }
                _ => false,
            });
            match seen {
                Some(r) => println!("  msin {msin} readable at line {}", r.tick),
                None => println!("  msin {msin} never readable"),
            }
        }
    }
}
