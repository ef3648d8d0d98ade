//! Protect a message, deliver it, then show replay and tamper rejection.

use fiveg_sim::crypto_suite::{protect, unprotect, AlgorithmId, Direction, ProtectionKeys, ProtectionState};
use fiveg_sim::keys::Key128;

fn main() {
    let keys = ProtectionKeys {
        cipher: AlgorithmId::Nea2,
        integrity: AlgorithmId::Nia2,
        enc_key: Key128([3; 16]),
        int_key: Key128([4; 16]),
    };
    let mut network = ProtectionState::new(keys, 1, Direction::Downlink);
    let mut ue = ProtectionState::new(keys, 1, Direction::Uplink);

    let env = protect(b"registration accept", &mut network);
    println!("count {} mac {:02x?}", env.count, env.mac.unwrap());
    println!("ciphertext {}", hex::encode(&env.payload));
    println!("first delivery: {:?}", unprotect(&env, &mut ue).map(String::from_utf8));
    println!("replayed:       {:?}", unprotect(&env, &mut ue));

    let mut tampered = protect(b"registration accept", &mut network);
    tampered.payload[0] ^= 1;
    println!("bit flipped:    {:?}", unprotect(&tampered, &mut ue));

    let mut stripped = protect(b"registration accept", &mut network);
    stripped.integrity_alg = AlgorithmId::Nia0;
    println!("header to NIA0: {:?}", unprotect(&stripped, &mut ue));
}
