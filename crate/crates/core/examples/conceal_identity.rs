//! Conceal a SUPI under both schemes and show what an eavesdropper sees.

use fiveg_sim::identity::{conceal_supi, deconceal_supi, observe_msin, HnKeyMaterial, HnKeyPair, Supi};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let supi: Supi = "001-01-0000000042".parse().unwrap();
    let pair = HnKeyPair::generate(&mut rng);
    let home = HnKeyMaterial::home(&pair);
    let usim = HnKeyMaterial::usim(Some(pair.public), [supi.plmn()]);

    for (label, keys) in [("probabilistic-pk", &usim), ("null", &usim.without_public_key())] {
        let a = conceal_supi(&supi, keys, &mut rng);
        let b = conceal_supi(&supi, keys, &mut rng);
        println!("{label}:");
        println!("  first  {a}");
        println!("  second {b}");
        println!("  eavesdropper reads msin: {:?}", observe_msin(&a.ciphertext));
        println!("  home recovers {}", deconceal_supi(&a, &home).unwrap());
    }
}
