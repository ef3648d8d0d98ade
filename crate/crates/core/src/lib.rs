//! Deterministic simulator of the 5G registration and authentication
//! security plane.
//!
//! The crate hosts UE, base-station and core state machines, a
//! message-injecting adversary, and a discrete-event channel that ties them
//! together. Every run is reproducible from its scenario file and seed, and
//! every run leaves a line-delimited transcript that can be replayed and
//! audited independently of the code that produced it.
//!
//! Module map:
//!
//! - [`identity`]: SUPI/SUCI/5G-GUTI and the concealment schemes
//! - [`keys`]: the key hierarchy rooted at the long-term key `K`
//! - [`crypto_suite`]: algorithm registry, protection envelopes, negotiation
//! - [`pki`]: certificate chains for the optional CA-verified pre-auth mode
//! - [`protocol`]: UE and network state machines
//! - [`adversary`]: sniffer and rogue base station attack catalog
//! - [`simcore`]: scheduler, transcript, scenarios and the outcome sweep
//! - [`report`] and [`cli`]: reports and the command-line front end
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod adversary;
pub mod cli;
pub mod crypto_suite;
pub mod identity;
pub mod keys;
pub mod pki;
pub mod prf;
pub mod protocol;
pub mod report;
pub mod simcore;

pub use adversary::{AttackKind, AttackOutcome, AttackerCapabilities, Verdict};
pub use simcore::scenario::ScenarioConfig;
pub use simcore::sim::Simulation;
