//! Derive a full key hierarchy and print it in the golden-fixture format.

use fiveg_sim::crypto_suite::AlgorithmId;
use fiveg_sim::keys::{derive_handover_k_gnb, derive_hierarchy, DerivationContext, RootKey};

fn main() {
    let root = RootKey([0x11; 32]);
    let context = DerivationContext {
        serving_network: "001-01".parse().unwrap(),
        run_counter: 1,
        cipher: AlgorithmId::Nea2,
        integrity: AlgorithmId::Nia2,
    };
    let h = derive_hierarchy(&root, context);
    print!("{}", h.to_fixture(&root));

    // Another serving network gives unrelated keys from the same root.
    let other = derive_hierarchy(&root, DerivationContext { serving_network: "001-02".parse().unwrap(), ..context });
    println!("k_ausf for 001-02 {}", other.k_ausf.to_hex());

    let next = derive_handover_k_gnb(&h.k_gnb, 7, 1);
    println!("k_gnb after handover to cell 7 {}", next.to_hex());
}
