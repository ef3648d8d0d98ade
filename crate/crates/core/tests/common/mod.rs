//! Shared helpers for integration tests: scenario builders, a random
//! configuration generator, and transcript checks that work on the raw
//! JSONL text instead of the library's own evidence code.

#![allow(dead_code)]

use std::path::PathBuf;

use fiveg_sim::identity::{GutiPolicy, Plmn, SuciScheme};
use fiveg_sim::protocol::{HandoverSecurity, Requirement};
use fiveg_sim::simcore::scenario::{AttackerConfig, SmfOverride, SubscriberConfig, UpPolicySetting};
use fiveg_sim::{AttackKind, ScenarioConfig};
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::Value;

pub fn data_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

pub fn fixture_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join(rel)
}

/// The shipped baseline: every defense on, attacker with all capabilities.
pub fn baseline() -> ScenarioConfig {
    ScenarioConfig::load(&data_path("scenarios/baseline.toml")).expect("baseline loads")
}

/// Baseline with every defense that the exploit grid sweeps turned off.
pub fn exposed() -> ScenarioConfig {
    let mut c = baseline();
    c.name = "exposed".into();
    c.knobs.suci_scheme = SuciScheme::Null;
    c.knobs.ca_mode = false;
    c.knobs.unauthenticated_emergency_allowed = true;
    c.knobs.capability_echo = false;
    c
}

/// Baseline without any attacker capability.
pub fn benign() -> ScenarioConfig {
    let mut c = baseline();
    c.name = "benign".into();
    c.attacks.clear();
    c.attacker.can_sniff = false;
    c.attacker.can_inject_preauth = false;
    c.attacker.can_broadcast = false;
    c.attacker.can_mutate_in_transit = false;
    c
}

fn pick<T: Copy>(rng: &mut impl Rng, xs: &[T]) -> T {
    *xs.choose(rng).expect("non-empty")
}

/// A random but valid scenario drawn around the baseline.
pub fn random_scenario(rng: &mut impl Rng) -> ScenarioConfig {
    let mut c = baseline();
    c.name = "random".into();
    c.seed = rng.gen_range(0..=i64::MAX as u64);
    c.attacks.clear();
    let k = &mut c.knobs;
    k.suci_scheme = pick(rng, &[SuciScheme::Null, SuciScheme::ProbabilisticPk]);
    k.null_algorithms_allowed = rng.gen();
    k.unauthenticated_emergency_allowed = rng.gen();
    k.handover_security = pick(rng, &[HandoverSecurity::Secure, HandoverSecurity::Insecure]);
    let reqs = [Requirement::Required, Requirement::Preferred, Requirement::NotNeeded];
    k.up_policy = UpPolicySetting { integrity: pick(rng, &reqs), confidentiality: pick(rng, &reqs) };
    k.local_smf_override =
        pick(rng, &[SmfOverride::None, SmfOverride::Required, SmfOverride::Preferred, SmfOverride::NotNeeded]);
    k.ca_mode = rng.gen();
    k.guti_policy = pick(rng, &[GutiPolicy::Never, GutiPolicy::EveryRegistration, GutiPolicy::EveryNEvents(2)]);
    k.capability_echo = rng.gen();
    let null_ok = k.null_algorithms_allowed;
    for n in &mut c.networks {
        n.cipher_preference.retain(|a| null_ok || !a.is_null());
        n.integrity_preference.retain(|a| null_ok || !a.is_null());
    }
    c.attacker = AttackerConfig {
        can_sniff: rng.gen_bool(0.8),
        can_inject_preauth: rng.gen_bool(0.8),
        can_broadcast: rng.gen_bool(0.8),
        can_mutate_in_transit: rng.gen_bool(0.8),
        lure_plmn: pick(rng, &["001-01".parse::<Plmn>().unwrap(), "001-02".parse().unwrap()]),
        broadcast_priority: rng.gen_range(0..200),
        cell_id: 666,
    };
    let home: Plmn = "001-01".parse().unwrap();
    let partner: Plmn = "001-02".parse().unwrap();
    let count = rng.gen_range(1..=3);
    c.subscribers = (0..count)
        .map(|i| {
            let mut root = [0u8; 32];
            rng.fill(&mut root);
            let mut provisioned = Vec::new();
            if rng.gen_bool(0.7) {
                provisioned.push(home);
            }
            if rng.gen_bool(0.3) {
                provisioned.push(partner);
            }
            SubscriberConfig {
                supi: format!("001-01-{:010}", 1 + i).parse().unwrap(),
                root_key: hex::encode(root),
                provisioned_networks: provisioned,
                sqn_skew: rng.gen_range(0..3),
                auth_method: fiveg_sim::protocol::AuthMethod::FiveGAka,
            }
        })
        .collect();
    c.validate().expect("random scenario is valid");
    c
}

pub fn parse_lines(jsonl: &str) -> Vec<Value> {
    jsonl.lines().map(|l| serde_json::from_str(l).expect("valid JSON line")).collect()
}

fn s<'a>(v: &'a Value, key: &str) -> &'a str {
    v.get(key).and_then(Value::as_str).unwrap_or("")
}

fn hex_has(hex_text: &str, needle: &[u8]) -> bool {
    hex::decode(hex_text).map(|b| b.windows(needle.len()).any(|w| w == needle)).unwrap_or(false)
}

/// Verdict of `attack` recomputed from raw transcript lines. Returns the
/// 1-based lines that prove success (empty for a failed attack).
pub fn independent_evidence(attack: AttackKind, jsonl: &str, msins: &[String]) -> Vec<usize> {
    let lines = parse_lines(jsonl);
    let line_of = |tick: u64| tick as usize;
    let mut hits = Vec::new();
    let msin_hit = |h: &str| msins.iter().any(|m| hex_has(h, m.as_bytes()));
    match attack {
        AttackKind::SupiCatchPassive | AttackKind::EmergencySupiCatch => {
            for (i, r) in lines.iter().enumerate() {
                if s(r, "event") != "observe" {
                    continue;
                }
                if attack == AttackKind::EmergencySupiCatch && s(r, "kind") != "EmergencyRequest" {
                    continue;
                }
                if r.get("readable").and_then(Value::as_str).is_some_and(msin_hit) {
                    hits.push(i + 1);
                }
            }
        }
        AttackKind::SupiCatchActive => {
            for (i, r) in lines.iter().enumerate() {
                if s(r, "event") == "deliver" && s(r, "to") == "rogue" && msin_hit(s(r, "wire")) {
                    hits.push(i + 1);
                }
            }
        }
        AttackKind::PreauthDosReject | AttackKind::SilentDowngrade => {
            let (phase, kinds): (&str, &[&str]) = if attack == AttackKind::PreauthDosReject {
                ("denied", &["RegistrationReject", "TauReject"])
            } else {
                ("legacy-attached", &["DowngradeCommand"])
            };
            for (i, r) in lines.iter().enumerate() {
                if s(r, "event") != "phase" || s(r, "phase") != phase {
                    continue;
                }
                let Some(cause) = r.get("cause").and_then(Value::as_u64) else { continue };
                let c = &lines[line_of(cause) - 1];
                if s(c, "event") == "deliver"
                    && s(c, "from") == "rogue"
                    && s(c, "to") == s(r, "node")
                    && s(c, "verdict") == "accepted"
                    && kinds.contains(&s(c, "kind"))
                {
                    hits.push(i + 1);
                }
            }
        }
        AttackKind::BiddingDown => {
            let mut stripped_ues = Vec::new();
            for (i, r) in lines.iter().enumerate() {
                if s(r, "event") == "mutate" && s(r, "kind") == "RegistrationRequest" && s(r, "before") != s(r, "after") {
                    stripped_ues.push(s(r, "from").to_string());
                }
                if s(r, "event") == "deliver"
                    && s(r, "kind") == "RegistrationAccept"
                    && s(r, "verdict") == "accepted"
                    && s(r, "protection").starts_with("NEA0/")
                    && stripped_ues.iter().any(|u| u == s(r, "to"))
                {
                    hits.push(i + 1);
                }
            }
        }
    }
    hits
}

/// Lines where an attacker-controlled endpoint holds an active context or
/// completes a registration.
pub fn attacker_context_violations(jsonl: &str) -> Vec<usize> {
    let lines = parse_lines(jsonl);
    let mut bad = Vec::new();
    for (i, r) in lines.iter().enumerate() {
        match s(r, "event") {
            "context" if s(r, "state") == "active" && (s(r, "peer") == "rogue" || s(r, "node") == "rogue") => {
                bad.push(i + 1)
            }
            "phase" if s(r, "phase") == "registered" => {
                let cause = r.get("cause").and_then(Value::as_u64).expect("phase has a cause");
                if s(&lines[cause as usize - 1], "from") == "rogue" {
                    bad.push(i + 1);
                }
            }
            _ => {}
        }
    }
    bad
}

/// Ticks equal line numbers, causes point backwards, and deliveries follow
/// their sends.
pub fn check_tick_discipline(jsonl: &str) -> Result<(), String> {
    let lines = parse_lines(jsonl);
    for (i, r) in lines.iter().enumerate() {
        let tick = r["tick"].as_u64().ok_or("missing tick")?;
        if tick != i as u64 + 1 {
            return Err(format!("line {}: tick {tick}", i + 1));
        }
        if let Some(c) = r.get("cause").and_then(Value::as_u64) {
            if c >= tick {
                return Err(format!("line {}: cause {c} not before tick", i + 1));
            }
        }
        if s(r, "event") == "deliver" {
            let sent = r["sent"].as_u64().ok_or("deliver without sent")?;
            if sent >= tick || s(&lines[sent as usize - 1], "event") != "send" {
                return Err(format!("line {}: delivery before or without its send", i + 1));
            }
        }
    }
    Ok(())
}
