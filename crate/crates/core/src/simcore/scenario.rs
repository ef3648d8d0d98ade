//! Scenario files (TOML, version `fiveg-sim/1`).
//!
//! Every knob must be spelled out; there are no implicit defaults. Parse
//! errors name the offending field by its dotted path.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::adversary::{AttackKind, AttackerCapabilities};
use crate::crypto_suite::{AlgorithmId, AlgorithmKind};
use crate::identity::{GutiPolicy, Plmn, SuciScheme, Supi};
use crate::keys::RootKey;
use crate::protocol::{AuthMethod, HandoverSecurity, Requirement};

pub const SCENARIO_VERSION: &str = "fiveg-sim/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid config: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidConfig(Vec<Diagnostic>),
}

impl ScenarioError {
    pub fn diagnostics(&self) -> &[Diagnostic] {
        match self {
            ScenarioError::InvalidConfig(d) => d,
            ScenarioError::Io { .. } => &[],
        }
    }

    fn single(field: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::InvalidConfig(vec![Diagnostic { field: field.into(), message: message.into() }])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpPolicySetting {
    pub integrity: Requirement,
    pub confidentiality: Requirement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmfOverride {
    None,
    Required,
    Preferred,
    NotNeeded,
}

impl SmfOverride {
    pub fn requirement(self) -> Option<Requirement> {
        match self {
            SmfOverride::None => None,
            SmfOverride::Required => Some(Requirement::Required),
            SmfOverride::Preferred => Some(Requirement::Preferred),
            SmfOverride::NotNeeded => Some(Requirement::NotNeeded),
        }
    }
}

/// Operator-facing defense and exposure knobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Knobs {
    /// `null`: the home network configured the null scheme.
    /// `probabilistic-pk`: conceal whenever the USIM holds the home key.
    pub suci_scheme: SuciScheme,
    pub null_algorithms_allowed: bool,
    pub unauthenticated_emergency_allowed: bool,
    pub handover_security: HandoverSecurity,
    pub up_policy: UpPolicySetting,
    pub local_smf_override: SmfOverride,
    pub ca_mode: bool,
    pub guti_policy: GutiPolicy,
    pub capability_echo: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackerConfig {
    pub can_sniff: bool,
    pub can_inject_preauth: bool,
    pub can_broadcast: bool,
    pub can_mutate_in_transit: bool,
    /// PLMN the rogue cell broadcasts.
    pub lure_plmn: Plmn,
    pub broadcast_priority: u32,
    pub cell_id: u32,
}

impl AttackerConfig {
    pub fn capabilities(&self) -> AttackerCapabilities {
        AttackerCapabilities {
            can_sniff: self.can_sniff,
            can_inject_preauth: self.can_inject_preauth,
            can_broadcast: self.can_broadcast,
            can_mutate_in_transit: self.can_mutate_in_transit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubscriberConfig {
    pub supi: Supi,
    /// 64 hex digits.
    pub root_key: String,
    /// PLMNs whose home network public key the USIM holds.
    pub provisioned_networks: Vec<Plmn>,
    /// Initial USIM run counter ahead of the home network's.
    pub sqn_skew: u64,
    pub auth_method: AuthMethod,
}

impl SubscriberConfig {
    pub fn root(&self) -> RootKey {
        RootKey::from_hex(&self.root_key).expect("validated")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkEntry {
    pub name: String,
    pub plmn: Plmn,
    pub cell_id: u32,
    pub broadcast_priority: u32,
    pub cipher_preference: Vec<AlgorithmId>,
    pub integrity_preference: Vec<AlgorithmId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: String,
    pub name: String,
    pub seed: u64,
    pub attacks: Vec<AttackKind>,
    pub knobs: Knobs,
    pub attacker: AttackerConfig,
    pub subscribers: Vec<SubscriberConfig>,
    pub networks: Vec<NetworkEntry>,
}

/// Turns a serde error at `path` into a diagnostic naming the full field.
fn diagnostic_from(path: &str, message: &str) -> Diagnostic {
    let missing = message
        .strip_prefix("missing field `")
        .and_then(|rest| rest.split('`').next());
    let field = match (missing, path) {
        (Some(name), "." | "") => name.to_string(),
        (Some(name), p) => format!("{p}.{name}"),
        (None, "." | "") => "(root)".to_string(),
        (None, p) => p.to_string(),
    };
    let message = message.lines().next().unwrap_or(message).to_string();
    Diagnostic { field, message }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let de = toml::Deserializer::new(text);
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ScenarioError::InvalidConfig(vec![diagnostic_from(&path, e.inner().message())])
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Deserializes an already-parsed TOML tree (used by grid expansion).
    pub fn from_toml_value(value: toml::Value) -> Result<Self, ScenarioError> {
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            ScenarioError::InvalidConfig(vec![diagnostic_from(&path, &e.inner().to_string())])
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut d = Vec::new();
        let mut err = |field: String, message: String| d.push(Diagnostic { field, message });
        if self.version != SCENARIO_VERSION {
            err("version".into(), format!("expected {SCENARIO_VERSION:?}, got {:?}", self.version));
        }
        // scenario files are TOML, whose integers are signed 64-bit
        if self.seed > i64::MAX as u64 {
            err("seed".into(), format!("must be at most {}", i64::MAX));
        }
        if self.subscribers.is_empty() {
            err("subscribers".into(), "at least one subscriber is required".into());
        }
        if self.networks.is_empty() {
            err("networks".into(), "at least one network is required".into());
        }
        let mut names = BTreeSet::new();
        let mut plmns = BTreeSet::new();
        for (i, n) in self.networks.iter().enumerate() {
            let f = |s: &str| format!("networks[{i}].{s}");
            if n.name.is_empty() || n.name == "rogue" || n.name.starts_with("ue") {
                err(f("name"), "names must be non-empty and not \"rogue\" or start with \"ue\"".into());
            }
            if !names.insert(n.name.clone()) {
                err(f("name"), format!("duplicate network name {:?}", n.name));
            }
            if !plmns.insert(n.plmn) {
                err(f("plmn"), format!("duplicate network plmn {}", n.plmn));
            }
            for (field, prefs, kind) in [
                ("cipher_preference", &n.cipher_preference, AlgorithmKind::Ciphering),
                ("integrity_preference", &n.integrity_preference, AlgorithmKind::Integrity),
            ] {
                if prefs.is_empty() {
                    err(f(field), "must list at least one algorithm".into());
                }
                for a in prefs {
                    if a.kind() != kind {
                        err(f(field), format!("{a} is not a {kind:?} algorithm"));
                    }
                    if a.is_null() && !self.knobs.null_algorithms_allowed {
                        err(f(field), format!("{a} listed but null_algorithms_allowed = false"));
                    }
                }
            }
        }
        let mut supis = BTreeSet::new();
        for (i, s) in self.subscribers.iter().enumerate() {
            let f = |x: &str| format!("subscribers[{i}].{x}");
            if !supis.insert(s.supi) {
                err(f("supi"), format!("duplicate subscriber {}", s.supi));
            }
            if RootKey::from_hex(&s.root_key).is_err() {
                err(f("root_key"), "expected 64 hex digits".into());
            }
            if !plmns.contains(&s.supi.plmn()) {
                err(f("supi"), format!("no network entry for home plmn {}", s.supi.plmn()));
            }
            for p in &s.provisioned_networks {
                if !plmns.contains(p) {
                    err(f("provisioned_networks"), format!("no network entry for {p} to hold a key for"));
                }
            }
        }
        let mut seen = BTreeSet::new();
        for a in &self.attacks {
            if !seen.insert(*a) {
                err("attacks".into(), format!("duplicate attack {a}"));
            }
        }
        if d.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::InvalidConfig(d))
        }
    }

    /// Stable hash over everything except the name and seed, so equal knob
    /// settings fingerprint equally across seeds.
    pub fn fingerprint(&self) -> String {
        let mut c = self.clone();
        c.seed = 0;
        c.name.clear();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(&Sha256::digest(bytes)[..8])
    }

    pub fn knob_summary(&self) -> Vec<(String, String)> {
        let value = toml::Value::try_from(self.knobs).expect("knobs serialize");
        let mut out = Vec::new();
        flatten("", &value, &mut out);
        out
    }

    pub fn home_network_index(&self, supi: &Supi) -> Option<usize> {
        self.networks.iter().position(|n| n.plmn == supi.plmn())
    }
}

fn flatten(prefix: &str, v: &toml::Value, out: &mut Vec<(String, String)>) {
    match v {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        toml::Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// Error used when a field is set to a value outside its domain after parsing.
pub fn invalid(field: &str, message: &str) -> ScenarioError {
    ScenarioError::single(field, message)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASELINE: &str = include_str!("../../data/scenarios/baseline.toml");

    fn fields(text: &str) -> Vec<String> {
        ScenarioConfig::from_toml_str(text).unwrap_err().diagnostics().iter().map(|d| d.field.clone()).collect()
    }

    #[test]
    fn baseline_parses_and_roundtrips() {
        let c = ScenarioConfig::from_toml_str(BASELINE).unwrap();
        assert_eq!(ScenarioConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn missing_knob_names_dotted_path() {
        let text = BASELINE.replace("ca_mode = true\n", "");
        assert_eq!(fields(&text), ["knobs.ca_mode"]);
        let text = BASELINE.replace("integrity = \"required\"\n", "");
        assert_eq!(fields(&text), ["knobs.up_policy.integrity"]);
        let text = BASELINE.replace("seed = 7\n", "");
        assert_eq!(fields(&text), ["seed"]);
    }

    #[test]
    fn semantic_errors_collected() {
        let text = BASELINE
            .replace("version = \"fiveg-sim/1\"", "version = \"fiveg-sim/0\"")
            .replace("name = \"partner\"", "name = \"home\"");
        assert_eq!(fields(&text), ["version", "networks[1].name"]);
    }

    #[test]
    fn null_algorithm_needs_knob() {
        let text = BASELINE.replace("null_algorithms_allowed = true", "null_algorithms_allowed = false");
        assert_eq!(fields(&text), ["networks[0].cipher_preference", "networks[1].cipher_preference"]);
    }

    #[test]
    fn seed_must_fit_toml_integer() {
        let mut c = ScenarioConfig::from_toml_str(BASELINE).unwrap();
        c.seed = u64::MAX;
        assert_eq!(c.validate().unwrap_err().diagnostics()[0].field, "seed");
    }

    #[test]
    fn fingerprint_ignores_name_and_seed_only() {
        let a = ScenarioConfig::from_toml_str(BASELINE).unwrap();
        let mut b = a.clone();
        b.name = "other".into();
        b.seed = 1;
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.knobs.ca_mode = false;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
