//! Home network: ARPF subscriber records, AUSF vector generation and the
//! home-control confirmation ledger.
//!
//! Challenge-response is a keyed PRF over a fresh nonce under the root key.
//! The sequence-number machinery is reduced to one run counter per
//! subscriber, with an explicit resynchronization path.

use std::collections::BTreeMap;

use rand::RngCore;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::identity::{deconceal_supi, HnKeyMaterial, HnKeyPair, IdentityError, Plmn, Suci, Supi};
use crate::keys::{derive_k_ausf, Key256, RootKey};
use crate::prf::prf;

fn counter_input(nonce: &[u8; 16], run_counter: u64) -> Vec<u8> {
    let mut v = nonce.to_vec();
    v.extend_from_slice(&run_counter.to_be_bytes());
    v
}

/// Network authentication token the USIM checks before answering.
pub fn autn(root: &RootKey, nonce: &[u8; 16], run_counter: u64) -> [u8; 8] {
    let full = prf(&root.0, "autn", &counter_input(nonce, run_counter));
    full[..8].try_into().unwrap()
}

/// UE response; bound to the serving network name.
pub fn res(root: &RootKey, nonce: &[u8; 16], run_counter: u64, serving_network: &Plmn) -> [u8; 16] {
    let mut input = counter_input(nonce, run_counter);
    input.extend_from_slice(serving_network.serving_network_name().as_bytes());
    prf(&root.0, "res", &input)[..16].try_into().unwrap()
}

/// What the serving network gets to compare against: a hash of the expected
/// response, so it cannot produce the response itself.
pub fn hres(res: &[u8; 16]) -> [u8; 16] {
    Sha256::digest(res)[..16].try_into().unwrap()
}

/// Proof that a resynchronization request came from the USIM.
pub fn resync_mac(root: &RootKey, nonce: &[u8; 16], usim_counter: u64) -> [u8; 8] {
    prf(&root.0, "resync", &counter_input(nonce, usim_counter))[..8].try_into().unwrap()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HomeError {
    #[error("unknown subscriber {0}")]
    UnknownSubscriber(Supi),
    #[error("no home network for {0}")]
    UnknownHome(Plmn),
    #[error("identity: {0}")]
    Identity(#[from] IdentityError),
    #[error("authentication confirmation failed")]
    AuthFailure,
    #[error("resynchronization rejected")]
    ResyncRejected,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArpfRecord {
    pub root: RootKey,
    pub run_counter: u64,
}

/// What the serving network receives from the home network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthVector {
    pub nonce: [u8; 16],
    pub run_counter: u64,
    pub autn: [u8; 8],
    pub hxres: [u8; 16],
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct PendingRun {
    serving_network: Plmn,
    xres: [u8; 16],
    k_ausf: Key256,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfirmationEntry {
    pub supi: Supi,
    pub serving_network: Plmn,
    pub run_counter: u64,
    /// Decision reported by the operator hook. Recorded, never enforced.
    pub hook_decision: Option<String>,
}

/// Operator policy hook consulted on every confirmation.
pub type PolicyHook = fn(&ConfirmationEntry) -> String;

#[derive(Debug, Clone)]
pub struct HomeNetwork {
    pub plmn: Plmn,
    pub keys: HnKeyPair,
    pub arpf: BTreeMap<Supi, ArpfRecord>,
    pending: BTreeMap<(Supi, u64), PendingRun>,
    pub ledger: Vec<ConfirmationEntry>,
    pub policy_hook: Option<PolicyHook>,
    rng: ChaCha20Rng,
}

impl HomeNetwork {
    pub fn new(plmn: Plmn, keys: HnKeyPair, rng: ChaCha20Rng) -> Self {
        Self { plmn, keys, arpf: BTreeMap::new(), pending: BTreeMap::new(), ledger: Vec::new(), policy_hook: None, rng }
    }

    pub fn add_subscriber(&mut self, supi: Supi, root: RootKey) {
        self.arpf.insert(supi, ArpfRecord { root, run_counter: 0 });
    }

    pub fn deconceal(&self, suci: &Suci) -> Result<Supi, HomeError> {
        Ok(deconceal_supi(suci, &HnKeyMaterial::home(&self.keys))?)
    }

    /// Fresh challenge for `supi` authenticating in `serving_network`.
    pub fn generate_vector(&mut self, supi: &Supi, serving_network: Plmn) -> Result<AuthVector, HomeError> {
        let rec = self.arpf.get_mut(supi).ok_or(HomeError::UnknownSubscriber(*supi))?;
        rec.run_counter += 1;
        let run_counter = rec.run_counter;
        let mut nonce = [0u8; 16];
        self.rng.fill_bytes(&mut nonce);
        let xres = res(&rec.root, &nonce, run_counter, &serving_network);
        let k_ausf = derive_k_ausf(&rec.root, &serving_network, run_counter);
        let autn = autn(&rec.root, &nonce, run_counter);
        self.pending.insert((*supi, run_counter), PendingRun { serving_network, xres, k_ausf });
        Ok(AuthVector { nonce, run_counter, autn, hxres: hres(&xres) })
    }

    /// AUSF confirmation. On success the ledger gains exactly one entry and
    /// `K_AUSF` is released to the serving network.
    pub fn confirm(
        &mut self,
        supi: &Supi,
        run_counter: u64,
        serving_network: Plmn,
        response: &[u8; 16],
    ) -> Result<Key256, HomeError> {
        let key = (*supi, run_counter);
        let run = self.pending.get(&key).ok_or(HomeError::AuthFailure)?;
        if run.serving_network != serving_network || &run.xres != response {
            return Err(HomeError::AuthFailure);
        }
        let run = self.pending.remove(&key).unwrap();
        let mut entry = ConfirmationEntry { supi: *supi, serving_network, run_counter, hook_decision: None };
        if let Some(hook) = self.policy_hook {
            entry.hook_decision = Some(hook(&entry));
        }
        self.ledger.push(entry);
        Ok(run.k_ausf)
    }

    /// Accepts the USIM's counter if the resync MAC checks out.
    pub fn resync(&mut self, supi: &Supi, nonce: &[u8; 16], usim_counter: u64, mac: &[u8; 8]) -> Result<(), HomeError> {
        let rec = self.arpf.get_mut(supi).ok_or(HomeError::UnknownSubscriber(*supi))?;
        if &resync_mac(&rec.root, nonce, usim_counter) != mac {
            return Err(HomeError::ResyncRejected);
        }
        rec.run_counter = rec.run_counter.max(usim_counter);
        Ok(())
    }
}

/// Inter-network backbone: serving networks reach home networks through it.
/// The attacker has no access.
#[derive(Debug, Clone, Default)]
pub struct HomeDirectory {
    pub homes: BTreeMap<Plmn, HomeNetwork>,
}

impl HomeDirectory {
    pub fn get(&self, plmn: &Plmn) -> Option<&HomeNetwork> {
        self.homes.get(plmn)
    }

    pub fn get_mut(&mut self, plmn: &Plmn) -> Result<&mut HomeNetwork, HomeError> {
        self.homes.get_mut(plmn).ok_or(HomeError::UnknownHome(*plmn))
    }

    pub fn total_ledger_entries(&self) -> usize {
        self.homes.values().map(|h| h.ledger.len()).sum()
    }
}
