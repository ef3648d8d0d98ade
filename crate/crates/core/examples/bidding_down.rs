//! Capability stripping in transit, detected by the echo in the Security
//! Mode Command, first at the negotiation layer, then end to end.

use std::path::Path;

use fiveg_sim::adversary::execute_attack;
use fiveg_sim::crypto_suite::{bidding_down_detected, negotiate, AlgorithmId, OperatorPolicy, SecurityCapabilities};
use fiveg_sim::{AttackKind, ScenarioConfig};

fn main() {
    let policy = OperatorPolicy {
        cipher_preference: vec![AlgorithmId::Nea2, AlgorithmId::Nea1, AlgorithmId::Nea0],
        integrity_preference: vec![AlgorithmId::Nia2, AlgorithmId::Nia1],
        null_algorithms_allowed: true,
        capability_echo: true,
    };
    let sent = SecurityCapabilities::standard(true);
    let stripped = SecurityCapabilities { ciphering: vec![AlgorithmId::Nea0], integrity: sent.integrity.clone() };
    let n = negotiate(&stripped, &policy).unwrap();
    println!("network picks {} / {}", n.cipher, n.integrity);
    println!("UE notices the echo differs: {}", bidding_down_detected(&sent, &n.replayed_caps));

    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/scenarios/baseline.toml");
    let mut config = ScenarioConfig::load(&path).unwrap();
    for echo in [false, true] {
        config.knobs.capability_echo = echo;
        let o = execute_attack(AttackKind::BiddingDown, &config).unwrap();
        println!("capability_echo = {echo}: {}", o.verdict.label());
    }
}
