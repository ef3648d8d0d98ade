//! Certificate chains for CA-verified pre-authentication messages.
//!
//! In CA mode every legitimate network holds a certificate issued under a
//! global root and signs the messages it sends before a security context
//! exists. UEs carry the root in a [`TrustStore`] and drop anything that does
//! not chain to it. Signatures are Ed25519.

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::identity::Plmn;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("empty certificate chain")]
    Empty,
    #[error("certificate for {0:?} has a bad signature")]
    BadSignature(String),
    #[error("chain does not end at a trusted root (last issuer {0:?})")]
    UntrustedRoot(String),
    #[error("certificate issued for {certified} but message claims {claimed}")]
    PlmnMismatch { certified: Plmn, claimed: Plmn },
    #[error("malformed key or signature bytes")]
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub subject: String,
    pub plmn: Plmn,
    pub public_key: [u8; 32],
    pub issuer: String,
    pub signature: Vec<u8>,
}

impl Certificate {
    fn tbs(subject: &str, plmn: &Plmn, public_key: &[u8; 32], issuer: &str) -> Vec<u8> {
        let mut v = Vec::new();
        for part in [subject.as_bytes(), plmn.to_string().as_bytes(), public_key, issuer.as_bytes()] {
            v.extend_from_slice(&(part.len() as u32).to_be_bytes());
            v.extend_from_slice(part);
        }
        v
    }

    fn to_be_signed(&self) -> Vec<u8> {
        Self::tbs(&self.subject, &self.plmn, &self.public_key, &self.issuer)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustAnchor {
    pub name: String,
    pub public_key: [u8; 32],
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustStore {
    pub anchors: Vec<TrustAnchor>,
}

impl TrustStore {
    pub fn with_anchor(anchor: TrustAnchor) -> Self {
        Self { anchors: vec![anchor] }
    }

    fn find(&self, name: &str) -> Option<&TrustAnchor> {
        self.anchors.iter().find(|a| a.name == name)
    }
}

pub struct CertificateAuthority {
    name: String,
    key: SigningKey,
}

impl CertificateAuthority {
    pub fn from_seed(name: impl Into<String>, seed: [u8; 32]) -> Self {
        Self { name: name.into(), key: SigningKey::from_bytes(&seed) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn anchor(&self) -> TrustAnchor {
        TrustAnchor { name: self.name.clone(), public_key: self.key.verifying_key().to_bytes() }
    }

    pub fn issue(&self, subject: &str, plmn: Plmn, subject_key: &VerifyingKey) -> Certificate {
        let public_key = subject_key.to_bytes();
        let tbs = Certificate::tbs(subject, &plmn, &public_key, &self.name);
        Certificate {
            subject: subject.to_string(),
            plmn,
            public_key,
            issuer: self.name.clone(),
            signature: self.key.sign(&tbs).to_bytes().to_vec(),
        }
    }
}

/// A network's signing identity: its key and the chain that certifies it.
#[derive(Clone)]
pub struct NetworkSigner {
    pub chain: Vec<Certificate>,
    key: SigningKey,
}

impl std::fmt::Debug for NetworkSigner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NetworkSigner").field("chain", &self.chain).finish_non_exhaustive()
    }
}

impl NetworkSigner {
    /// Key pair from `seed`, certified by `ca`.
    pub fn certified(ca: &CertificateAuthority, subject: &str, plmn: Plmn, seed: [u8; 32]) -> Self {
        let key = SigningKey::from_bytes(&seed);
        let cert = ca.issue(subject, plmn, &key.verifying_key());
        Self { chain: vec![cert], key }
    }

    pub fn sign(&self, data: &[u8]) -> Vec<u8> {
        self.key.sign(data).to_bytes().to_vec()
    }
}

fn verify_raw(public_key: &[u8; 32], data: &[u8], sig: &[u8]) -> Result<(), ChainError> {
    let vk = VerifyingKey::from_bytes(public_key).map_err(|_| ChainError::Malformed)?;
    let sig = Signature::from_slice(sig).map_err(|_| ChainError::Malformed)?;
    vk.verify(data, &sig).map_err(|_| ChainError::Malformed)
}

/// Walks `chain` (leaf first) up to a trust anchor and returns the leaf key.
/// The leaf must be issued for `claimed`.
pub fn verify_chain(chain: &[Certificate], store: &TrustStore, claimed: Plmn) -> Result<[u8; 32], ChainError> {
    let leaf = chain.first().ok_or(ChainError::Empty)?;
    if leaf.plmn != claimed {
        return Err(ChainError::PlmnMismatch { certified: leaf.plmn, claimed });
    }
    for (i, cert) in chain.iter().enumerate() {
        let issuer_key = match chain.get(i + 1) {
            Some(parent) if parent.subject == cert.issuer => parent.public_key,
            Some(_) => return Err(ChainError::BadSignature(cert.subject.clone())),
            None => store
                .find(&cert.issuer)
                .ok_or_else(|| ChainError::UntrustedRoot(cert.issuer.clone()))?
                .public_key,
        };
        verify_raw(&issuer_key, &cert.to_be_signed(), &cert.signature)
            .map_err(|_| ChainError::BadSignature(cert.subject.clone()))?;
    }
    Ok(leaf.public_key)
}

/// Verifies a detached signature under the leaf of a verified chain.
pub fn verify_signed(
    chain: &[Certificate],
    signature: &[u8],
    data: &[u8],
    store: &TrustStore,
    claimed: Plmn,
) -> Result<(), ChainError> {
    let leaf_key = verify_chain(chain, store, claimed)?;
    verify_raw(&leaf_key, data, signature).map_err(|_| ChainError::BadSignature(chain[0].subject.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plmn(s: &str) -> Plmn {
        s.parse().unwrap()
    }

    #[test]
    fn certified_signature_verifies() {
        let ca = CertificateAuthority::from_seed("global-5g-ca", [1; 32]);
        let store = TrustStore::with_anchor(ca.anchor());
        let signer = NetworkSigner::certified(&ca, "home", plmn("001-01"), [2; 32]);
        let sig = signer.sign(b"reject");
        assert_eq!(verify_signed(&signer.chain, &sig, b"reject", &store, plmn("001-01")), Ok(()));
        assert!(verify_signed(&signer.chain, &sig, b"accept", &store, plmn("001-01")).is_err());
    }

    #[test]
    fn self_signed_rogue_rejected() {
        let ca = CertificateAuthority::from_seed("global-5g-ca", [1; 32]);
        let rogue_ca = CertificateAuthority::from_seed("rogue-ca", [9; 32]);
        let store = TrustStore::with_anchor(ca.anchor());
        let rogue = NetworkSigner::certified(&rogue_ca, "rogue", plmn("001-02"), [3; 32]);
        let sig = rogue.sign(b"m");
        assert_eq!(
            verify_signed(&rogue.chain, &sig, b"m", &store, plmn("001-02")),
            Err(ChainError::UntrustedRoot("rogue-ca".into()))
        );
    }

    #[test]
    fn rogue_impersonating_issuer_name_rejected() {
        let ca = CertificateAuthority::from_seed("global-5g-ca", [1; 32]);
        let fake = CertificateAuthority::from_seed("global-5g-ca", [8; 32]);
        let store = TrustStore::with_anchor(ca.anchor());
        let rogue = NetworkSigner::certified(&fake, "rogue", plmn("001-01"), [3; 32]);
        let sig = rogue.sign(b"m");
        assert!(matches!(
            verify_signed(&rogue.chain, &sig, b"m", &store, plmn("001-01")),
            Err(ChainError::BadSignature(_))
        ));
    }

    #[test]
    fn certificate_bound_to_plmn() {
        let ca = CertificateAuthority::from_seed("ca", [1; 32]);
        let store = TrustStore::with_anchor(ca.anchor());
        let signer = NetworkSigner::certified(&ca, "partner", plmn("001-02"), [2; 32]);
        let sig = signer.sign(b"m");
        assert!(matches!(
            verify_signed(&signer.chain, &sig, b"m", &store, plmn("001-01")),
            Err(ChainError::PlmnMismatch { .. })
        ));
    }

    #[test]
    fn intermediate_chain() {
        let root = CertificateAuthority::from_seed("root", [1; 32]);
        let inter = CertificateAuthority::from_seed("inter", [4; 32]);
        let inter_cert = root.issue("inter", plmn("001-01"), &SigningKey::from_bytes(&[4; 32]).verifying_key());
        let mut signer = NetworkSigner::certified(&inter, "leaf", plmn("001-01"), [5; 32]);
        signer.chain.push(inter_cert);
        let store = TrustStore::with_anchor(root.anchor());
        let sig = signer.sign(b"m");
        assert_eq!(verify_signed(&signer.chain, &sig, b"m", &store, plmn("001-01")), Ok(()));
        assert!(verify_signed(&signer.chain, &sig, b"m", &TrustStore::default(), plmn("001-01")).is_err());
    }
}
