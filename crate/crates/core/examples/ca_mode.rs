//! Certificate chains for pre-authentication messages.

use fiveg_sim::pki::{verify_chain, CertificateAuthority, TrustStore};

fn main() {
    let ca = CertificateAuthority::from_seed("global-5g-ca", [1; 32]);
    let store = TrustStore::with_anchor(ca.anchor());
    let home = "001-01".parse().unwrap();
    let partner = "001-02".parse().unwrap();

    let key = ed25519_dalek::SigningKey::from_bytes(&[2; 32]);
    let cert = ca.issue("gnb-1", home, &key.verifying_key());
    println!("gnb-1 as 001-01: {:?}", verify_chain(std::slice::from_ref(&cert), &store, home).map(hex::encode));
    println!("gnb-1 as 001-02: {:?}", verify_chain(std::slice::from_ref(&cert), &store, partner));

    let rogue_ca = CertificateAuthority::from_seed("rogue", [3; 32]);
    let forged = rogue_ca.issue("gnb-1", home, &key.verifying_key());
    println!("self-signed chain: {:?}", verify_chain(&[forged], &store, home));
}
