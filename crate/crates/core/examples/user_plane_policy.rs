//! Apply a home user-plane policy with and without a local override, then
//! run traffic over the resulting bearer.

use fiveg_sim::crypto_suite::{AlgorithmId, Direction};
use fiveg_sim::keys::derive_as_keys;
use fiveg_sim::keys::Key256;
use fiveg_sim::protocol::up::{apply_up_policy, Drb, PduSession, Requirement, UpSecurityPolicy};

fn main() {
    let home = UpSecurityPolicy::home(Requirement::Required, Requirement::Required);
    let keys = derive_as_keys(Key256([9; 32]), AlgorithmId::Nea2, AlgorithmId::Nia2);
    for local in [None, Some(Requirement::NotNeeded)] {
        let mut audit = Vec::new();
        let cfg = apply_up_policy(PduSession { session_id: 5 }, home, local, &mut audit);
        println!("override {local:?}: integrity {} ciphering {}", cfg.integrity, cfg.ciphering);
        for a in &audit {
            println!("  audit session {} {}", a.session_id, a.event);
        }
        let mut gnb = Drb::new(&cfg, &keys, Direction::Downlink);
        let mut ue = Drb::new(&cfg, &keys, Direction::Uplink);
        let env = gnb.send(b"hello");
        println!("  on air {}", hex::encode(&env.payload));
        println!("  received {:?}", ue.receive(&env).map(String::from_utf8));
    }
}
