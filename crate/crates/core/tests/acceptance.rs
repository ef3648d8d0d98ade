//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any fails.

mod common;

use std::collections::{BTreeMap, HashSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use fiveg_sim::adversary::{evaluate, run_script};
use fiveg_sim::crypto_suite::{protect, unprotect, AlgorithmId, Direction, ProtectionKeys, ProtectionState, UnprotectError};
use fiveg_sim::identity::{conceal_supi, deconceal_supi, HnKeyMaterial, HnKeyPair, IdentityError, Plmn, Supi};
use fiveg_sim::keys::{derive_hierarchy, parse_fixture, DerivationContext, Key128, RootKey};
use fiveg_sim::protocol::{AccessType, ConnectionId, UePhase, UeTrigger};
use fiveg_sim::simcore::sim::ContextMode;
use fiveg_sim::simcore::{enumerate_outcomes, Cell, Expectations, Grid, OutcomeMatrix};
use fiveg_sim::{report, AttackKind, ScenarioConfig, Simulation};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn load_matrix() -> Result<(OutcomeMatrix, Duration), String> {
    let grid = Grid::load(&common::data_path("grids/defenses.toml")).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let m = enumerate_outcomes(&grid, 0).map_err(|e| e.to_string())?;
    Ok((m, start.elapsed()))
}

fn defenses(matrix: &OutcomeMatrix, elapsed: Duration) -> Outcome {
    let exp = Expectations::load(&common::data_path("expectations/defenses.csv")).map_err(|e| e.to_string())?;
    let cells = matrix.rows.len() * matrix.attacks.len();
    ensure(cells == 80, || format!("expected 80 cells, grid has {cells}"))?;
    ensure(elapsed < Duration::from_secs(300), || format!("sweep took {elapsed:?}"))?;
    let mismatches = matrix.diff(&exp);
    ensure(mismatches.is_empty(), || {
        mismatches.iter().map(|m| m.to_string()).collect::<Vec<_>>().join("; ")
    })?;

    // The stated preconditions, checked directly on the row labels.
    for row in &matrix.rows {
        let knob = |k: &str| row.config.split(';').find_map(|kv| kv.strip_prefix(&format!("{k}="))).unwrap();
        for (col, a) in matrix.attacks.iter().enumerate() {
            let success = match a {
                AttackKind::SupiCatchPassive => knob("suci_scheme") == "null",
                AttackKind::PreauthDosReject | AttackKind::SilentDowngrade => knob("ca_mode") == "false",
                AttackKind::EmergencySupiCatch => knob("unauthenticated_emergency_allowed") == "true",
                AttackKind::BiddingDown => knob("capability_echo") == "false",
                AttackKind::SupiCatchActive => unreachable!("not in the grid"),
            };
            let want = if success { Cell::Success } else { Cell::Fail };
            ensure(row.cells[col] == want, || format!("{} / {a}: {} but rule says {want}", row.config, row.cells[col]))?;
        }
    }

    // Second route: verdicts recomputed from the raw transcript lines.
    let grid = Grid::load(&common::data_path("grids/defenses.toml")).map_err(|e| e.to_string())?;
    for (label, cfg) in grid.configs().map_err(|e| e.to_string())? {
        for a in &grid.attacks {
            let o = fiveg_sim::adversary::execute_attack(*a, &cfg).map_err(|e| e.to_string())?;
            let msins: Vec<String> = cfg.subscribers.iter().map(|s| s.supi.msin().to_string()).collect();
            let independent = !common::independent_evidence(*a, &o.transcript.to_jsonl(), &msins).is_empty();
            ensure(independent == (o.verdict == fiveg_sim::Verdict::Success), || {
                format!("{label} / {a}: evaluator says {}, raw scan says {independent}", o.verdict)
            })?;
        }
    }
    Ok(format!("80 cells match in {:.2}s, raw-transcript cross-check agrees", elapsed.as_secs_f64()))
}

/// Shared randomized suite for mutual-authentication soundness and the
/// key-mirror property.
struct SuiteStats {
    runs: usize,
    unsupported: usize,
    successes_by_attack: BTreeMap<AttackKind, usize>,
    mirrored_contexts: usize,
    violations: Vec<String>,
    mirror_failures: Vec<String>,
}

fn randomized_suite() -> SuiteStats {
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_0002);
    let mut st = SuiteStats {
        runs: 0,
        unsupported: 0,
        successes_by_attack: BTreeMap::new(),
        mirrored_contexts: 0,
        violations: Vec::new(),
        mirror_failures: Vec::new(),
    };
    while st.runs < 1000 {
        let cfg = common::random_scenario(&mut rng);
        let attack = AttackKind::ALL[rng.gen_range(0..AttackKind::ALL.len())];
        if !attack.missing_capabilities(&cfg.attacker.capabilities()).is_empty() {
            st.unsupported += 1;
            continue;
        }
        let mut sim = Simulation::with_attack(&cfg, Some(attack)).expect("valid scenario");
        run_script(attack, &mut sim);
        st.runs += 1;
        let (verdict, _) = evaluate(attack, &sim.transcript, &sim.subscriber_msins(), Simulation::ROGUE_NAME);
        if verdict == fiveg_sim::Verdict::Success {
            *st.successes_by_attack.entry(attack).or_default() += 1;
        }
        let jsonl = sim.transcript.to_jsonl();
        let bad = common::attacker_context_violations(&jsonl);
        if !bad.is_empty() {
            st.violations.push(format!("seed {} {attack}: lines {bad:?}", cfg.seed));
        }
        if let Err(e) = common::check_tick_discipline(&jsonl) {
            st.violations.push(format!("seed {} {attack}: {e}", cfg.seed));
        }
        for ue in &sim.ues {
            if ue.phase != UePhase::Registered {
                continue;
            }
            for (conn, ctx) in &ue.contexts {
                let Some(h) = ctx.hierarchy.filter(|_| ctx.is_active() && !ctx.emergency) else { continue };
                let Some(net) = sim.networks.iter().find(|n| n.node == conn.peer) else {
                    st.violations.push(format!("seed {} {attack}: active context with non-network peer", cfg.seed));
                    continue;
                };
                let mirror = net
                    .active_context(&ConnectionId { peer: ue.node, access: conn.access })
                    .and_then(|c| c.hierarchy);
                if mirror == Some(h) {
                    st.mirrored_contexts += 1;
                } else {
                    st.mirror_failures.push(format!("seed {} {attack}: {} on {}", cfg.seed, ue.supi(), net.config.name));
                }
            }
        }
    }
    st
}

fn mutual_auth(st: &SuiteStats) -> Outcome {
    ensure(st.runs >= 1000, || format!("only {} runs", st.runs))?;
    ensure(st.violations.is_empty(), || st.violations.join("; "))?;
    Ok(format!(
        "{} attack runs ({} unsupported draws skipped), attacker never context-active; successes per attack {:?}",
        st.runs, st.unsupported, st.successes_by_attack
    ))
}

fn concealment() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_0003);
    let plmn: Plmn = "001-01".parse().unwrap();
    let pair = HnKeyPair::generate(&mut rng);
    let home = HnKeyMaterial::home(&pair);
    let usim = HnKeyMaterial::usim(Some(pair.public), [plmn]);
    let null_usim = HnKeyMaterial::usim(None, [plmn]);
    let supi: Supi = "001-01-0000000001".parse().unwrap();

    let mut seen = HashSet::new();
    for _ in 0..1000 {
        let suci = conceal_supi(&supi, &usim, &mut rng);
        ensure(seen.insert((suci.ciphertext.clone(), suci.ephemeral_tag.clone())), || "repeated concealment".into())?;
        ensure(deconceal_supi(&suci, &home) == Ok(supi), || "concealment of fixed supi does not roundtrip".into())?;
    }
    for i in 0..1000 {
        let s: Supi = format!("001-01-{:010}", rng.gen_range(0..10_000_000_000u64)).parse().unwrap();
        for keys in [&usim, &null_usim] {
            let suci = conceal_supi(&s, keys, &mut rng);
            ensure(deconceal_supi(&suci, &home) == Ok(s), || format!("roundtrip {i} failed for {s}"))?;
        }
    }
    let suci = conceal_supi(&supi, &usim, &mut rng);
    let body_bits = suci.ciphertext.len() * 8;
    let total_bits = body_bits + suci.ephemeral_tag.as_ref().map_or(0, |t| t.len() * 8);
    for _ in 0..100 {
        let bit = rng.gen_range(0..total_bits);
        let mut t = suci.clone();
        if bit < body_bits {
            t.ciphertext[bit / 8] ^= 1 << (bit % 8);
        } else {
            let b = bit - body_bits;
            t.ephemeral_tag.as_mut().unwrap()[b / 8] ^= 1 << (b % 8);
        }
        ensure(deconceal_supi(&t, &home) == Err(IdentityError::MalformedCiphertext), || {
            format!("bit {bit} flip not rejected")
        })?;
    }
    Ok("1000 distinct concealments, 2x1000 roundtrips, 100/100 bit flips rejected".into())
}

fn protection() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_0004);
    let ciphers = [AlgorithmId::Nea0, AlgorithmId::Nea1, AlgorithmId::Nea2];
    let integs = [AlgorithmId::Nia0, AlgorithmId::Nia1, AlgorithmId::Nia2];
    let mut pairs = 0;
    let mut nia0_replays_accepted = 0;
    for c in ciphers {
        for i in integs {
            if c.is_null() && i.is_null() {
                continue;
            }
            pairs += 1;
            let mut enc = [0u8; 16];
            let mut int = [0u8; 16];
            rng.fill_bytes(&mut enc);
            rng.fill_bytes(&mut int);
            let keys = ProtectionKeys { cipher: c, integrity: i, enc_key: Key128(enc), int_key: Key128(int) };
            let mut tx = ProtectionState::new(keys, 1, Direction::Uplink);
            let mut rx = ProtectionState::new(keys, 1, Direction::Downlink);
            for n in 0..1000 {
                let mut payload = vec![0u8; rng.gen_range(1..200)];
                rng.fill_bytes(&mut payload);
                let env = protect(&payload, &mut tx);
                if !i.is_null() {
                    let bits = env.payload.len() * 8;
                    let bit = rng.gen_range(0..bits);
                    let mut t = env.clone();
                    t.payload[bit / 8] ^= 1 << (bit % 8);
                    ensure(unprotect(&t, &mut rx.clone()) == Err(UnprotectError::IntegrityFailure), || {
                        format!("{c}/{i}: tamper at bit {bit} of payload {n} undetected")
                    })?;
                }
                ensure(unprotect(&env, &mut rx).as_deref() == Ok(&payload[..]), || format!("{c}/{i}: roundtrip {n}"))?;
                let replay = unprotect(&env, &mut rx);
                if i.is_null() {
                    ensure(replay.is_ok(), || format!("{c}/{i}: replay refused"))?;
                    nia0_replays_accepted += 1;
                } else {
                    ensure(matches!(replay, Err(UnprotectError::ReplayDetected { .. })), || {
                        format!("{c}/{i}: replay {n} accepted")
                    })?;
                }
            }
        }
    }
    Ok(format!("{pairs} pairs x 1000 payloads; NIA1/2 replays and tampers all caught; {nia0_replays_accepted} NIA0 replays accepted"))
}

fn key_mirror(st: &SuiteStats) -> Outcome {
    ensure(st.mirror_failures.is_empty(), || st.mirror_failures.join("; "))?;
    ensure(st.mirrored_contexts > 0, || "no successful AKA in the suite".into())?;

    // Directly driven AKA runs, including ones that need resynchronization.
    let mut mirrored = st.mirrored_contexts;
    for skew in 0..4 {
        let mut cfg = common::benign();
        cfg.subscribers[0].sqn_skew = skew;
        let mut sim = Simulation::new(&cfg).map_err(|e| e.to_string())?;
        let ok = sim.run_aka(0, 0).map_err(|e| format!("skew {skew}: {e}"))?;
        ensure(skew == 0 || ok.resyncs == 1, || format!("skew {skew}: {} resyncs", ok.resyncs))?;
        let conn = ConnectionId { peer: sim.networks[0].node, access: AccessType::ThreeGpp };
        let ue = sim.ues[0].contexts[&conn].hierarchy;
        let net = sim.networks[0].active_context(&ConnectionId { peer: sim.ues[0].node, access: AccessType::ThreeGpp });
        ensure(ue.is_some() && ue == net.and_then(|c| c.hierarchy), || format!("skew {skew}: hierarchies differ"))?;
        mirrored += 1;
    }

    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_0005);
    let algs_c = [AlgorithmId::Nea0, AlgorithmId::Nea1, AlgorithmId::Nea2];
    let algs_i = [AlgorithmId::Nia0, AlgorithmId::Nia1, AlgorithmId::Nia2];
    let mut leaves = HashSet::new();
    for _ in 0..10_000 {
        let mut root = [0u8; 32];
        rng.fill_bytes(&mut root);
        let ctx = DerivationContext {
            serving_network: format!("{:03}-{:02}", rng.gen_range(0..1000), rng.gen_range(0..100)).parse().unwrap(),
            run_counter: rng.gen(),
            cipher: algs_c[rng.gen_range(0..3)],
            integrity: algs_i[rng.gen_range(0..3)],
        };
        for (_, k) in derive_hierarchy(&RootKey(root), ctx).leaves() {
            ensure(leaves.insert(k.0), || "leaf collision".into())?;
        }
    }

    let text = std::fs::read_to_string(common::fixture_path("golden_hierarchy.txt")).map_err(|e| e.to_string())?;
    let golden = parse_fixture(&text).map_err(|e| e.to_string())?;
    let recomputed = derive_hierarchy(&golden.root, golden.hierarchy.context);
    ensure(recomputed == golden.hierarchy, || "golden hierarchy differs from recomputation".into())?;
    ensure(recomputed.to_fixture(&golden.root) == text, || "fixture rendering differs".into())?;
    Ok(format!("{mirrored} mirrored hierarchies, 60000 distinct leaves, golden file matches"))
}

fn context_layout() -> Outcome {
    let cfg = common::benign();
    let mut sim = Simulation::new(&cfg).map_err(|e| e.to_string())?;
    let distinct = sim.establish_contexts(0, ContextMode::DistinctSn).map_err(|e| e.to_string())?;
    ensure(distinct.contexts[0].serving_network != distinct.contexts[1].serving_network, || "same SN".into())?;
    let shared = distinct.shared_key_values(0, 1);
    ensure(shared == 0, || format!("distinct-SN contexts share {shared} key values"))?;

    let mut sim = Simulation::new(&cfg).map_err(|e| e.to_string())?;
    let same = sim.establish_contexts(0, ContextMode::SamePlmnDual).map_err(|e| e.to_string())?;
    ensure(same.nas_keys_equal(0, 1), || "same-PLMN contexts have different NAS keys".into())?;
    let (a, b) = (&same.contexts[0], &same.contexts[1]);
    ensure(a.k_ausf == b.k_ausf && a.hierarchy.map(|h| h.k_amf) == b.hierarchy.map(|h| h.k_amf), || {
        "same-PLMN contexts disagree above the NAS keys".into()
    })?;
    ensure(a.connection != b.connection, || "one connection for two accesses".into())?;

    // Counters are per connection: traffic on the 3GPP leg leaves the
    // non-3GPP leg's counters where they were.
    let conn_b = b.connection;
    let before = sim.ues[0].contexts[&conn_b].nas.as_ref().map(|s| (s.tx_count, s.rx_last));
    let cell = a.connection.peer;
    sim.ue_trigger(0, UeTrigger::Register { cell, access: AccessType::ThreeGpp });
    sim.run_until_quiet();
    let conn_a = a.connection;
    let a_after = sim.ues[0].contexts[&conn_a].nas.as_ref().map(|s| s.tx_count);
    let after = sim.ues[0].contexts[&conn_b].nas.as_ref().map(|s| (s.tx_count, s.rx_last));
    ensure(a_after > a.nas.as_ref().map(|s| s.tx_count), || "3GPP counter did not advance".into())?;
    ensure(before == after, || format!("non-3GPP counters moved: {before:?} -> {after:?}"))?;
    Ok("distinct-SN: 0 shared key values; same-PLMN: NAS keys equal, counters independent".into())
}

fn determinism() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_0007);
    let mut scenarios: Vec<ScenarioConfig> = vec![common::baseline(), common::exposed(), common::benign()];
    for _ in 0..20 {
        let mut c = common::random_scenario(&mut rng);
        c.attacks = AttackKind::ALL.iter().copied().filter(|a| a.missing_capabilities(&c.attacker.capabilities()).is_empty()).collect();
        scenarios.push(c);
    }
    for cfg in &scenarios {
        let a = report::generate(cfg, false).map_err(|e| e.to_string())?;
        let b = report::generate(cfg, false).map_err(|e| e.to_string())?;
        ensure(a.report.to_text() == b.report.to_text() && a.report.to_json() == b.report.to_json(), || {
            format!("{} seed {}: reports differ", cfg.name, cfg.seed)
        })?;
        ensure(a.transcripts.len() == b.transcripts.len(), || "transcript count differs".into())?;
        for ((na, ta), (nb, tb)) in a.transcripts.iter().zip(&b.transcripts) {
            ensure(na == nb && ta.to_jsonl() == tb.to_jsonl(), || format!("{} seed {}: {na} differs", cfg.name, cfg.seed))?;
        }
    }

    // End to end through the command line, compared file by file.
    let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
    let scenario = common::data_path("scenarios/baseline.toml");
    let mut stdouts = Vec::new();
    for d in &dirs {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let args = ["fiveg-sim".into(), "run".into(), scenario.clone().into_os_string(), "--out".into(), d.path().into()];
        let code = fiveg_sim::cli::run(args, &mut out, &mut err);
        ensure(code == 0, || format!("cli exit {code}: {}", String::from_utf8_lossy(&err)))?;
        stdouts.push(out);
    }
    ensure(stdouts[0] == stdouts[1], || "cli stdout differs".into())?;
    let mut files = 0;
    for entry in std::fs::read_dir(dirs[0].path()).map_err(|e| e.to_string())? {
        let name = entry.map_err(|e| e.to_string())?.file_name();
        let x = std::fs::read(dirs[0].path().join(&name)).map_err(|e| e.to_string())?;
        let y = std::fs::read(dirs[1].path().join(&name)).map_err(|e| e.to_string())?;
        ensure(x == y, || format!("{name:?} differs between runs"))?;
        files += 1;
    }
    Ok(format!("{} scenarios byte-identical in memory, {files} CLI output files identical", scenarios.len()))
}

fn monotonicity(matrix: &OutcomeMatrix) -> Outcome {
    let mut pairs = 0;
    for off in matrix.rows.iter().filter(|r| r.config.contains("ca_mode=false")) {
        let on_label = off.config.replace("ca_mode=false", "ca_mode=true");
        let on = matrix.rows.iter().find(|r| r.config == on_label).ok_or_else(|| format!("no row {on_label}"))?;
        for (col, a) in matrix.attacks.iter().enumerate() {
            pairs += 1;
            ensure(!(off.cells[col] == Cell::Fail && on.cells[col] == Cell::Success), || {
                format!("{a}: FAIL at {} but SUCCESS at {on_label}", off.config)
            })?;
        }
    }

    // The same property on random configurations beyond the grid.
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_0008);
    let mut extra = 0;
    while extra < 300 {
        let mut cfg = common::random_scenario(&mut rng);
        let attack = AttackKind::ALL[rng.gen_range(0..AttackKind::ALL.len())];
        if !attack.missing_capabilities(&cfg.attacker.capabilities()).is_empty() {
            continue;
        }
        cfg.knobs.ca_mode = false;
        let off = fiveg_sim::adversary::execute_attack(attack, &cfg).map_err(|e| e.to_string())?.verdict;
        cfg.knobs.ca_mode = true;
        let on = fiveg_sim::adversary::execute_attack(attack, &cfg).map_err(|e| e.to_string())?.verdict;
        ensure(!(off == fiveg_sim::Verdict::Fail && on == fiveg_sim::Verdict::Success), || {
            format!("seed {} {attack}: CA mode turned FAIL into SUCCESS", cfg.seed)
        })?;
        extra += 1;
    }
    Ok(format!("{pairs} grid pairs and {extra} random pairs: CA mode never helps the attacker"))
}

fn main() -> ExitCode {
    let matrix = load_matrix();
    let suite = randomized_suite();
    let results: Vec<(&str, Outcome)> = vec![
        ("1 outcome matrix reproduction", matrix.as_ref().map_err(Clone::clone).and_then(|(m, t)| defenses(m, *t))),
        ("2 mutual-authentication soundness", mutual_auth(&suite)),
        ("3 concealment properties", concealment()),
        ("4 protection properties", protection()),
        ("5 key mirror and separation", key_mirror(&suite)),
        ("6 context layout", context_layout()),
        ("7 determinism", determinism()),
        ("8 defense monotonicity", matrix.as_ref().map_err(Clone::clone).and_then(|(m, _)| monotonicity(m))),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
