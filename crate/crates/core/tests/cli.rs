mod common;

use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fiveg-sim"));
    for a in args {
        c.arg(a);
    }
    c.output().expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn validate_accepts_shipped_scenarios() {
    for name in ["baseline.toml", "grid_base.toml"] {
        let out = bin(&[&"validate", &common::data_path(&format!("scenarios/{name}"))]);
        assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
        assert!(text(&out.stdout).starts_with("ok "));
    }
}

#[test]
fn run_writes_reports_and_transcripts() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&[&"run", &common::data_path("scenarios/baseline.toml"), &"--out", &dir.path()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    for f in ["report.txt", "report.json", "transcript.jsonl", "transcript-supi_catch_passive.jsonl"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let report = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("[T3R1] supi_catch_passive FAIL @ transcript-supi_catch_passive.jsonl:1-"));
    assert!(report.contains("001-01-0000000001 registered"));
    assert_eq!(text(&out.stdout), report);
}

#[test]
fn every_verdict_line_names_a_transcript_location() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("exposed.toml");
    std::fs::write(&scenario, common::exposed().to_toml_string()).unwrap();
    let out = bin(&[&"run", &scenario, &"--out", &dir.path()]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    for v in json["verdicts"].as_array().unwrap() {
        assert_eq!(v["verdict"], "SUCCESS");
        let file = v["transcript"].as_str().unwrap();
        let lines: Vec<String> =
            std::fs::read_to_string(dir.path().join(file)).unwrap().lines().map(str::to_string).collect();
        for e in v["evidence"].as_array().unwrap() {
            let line = e["line"].as_u64().unwrap() as usize;
            let rec: serde_json::Value = serde_json::from_str(&lines[line - 1]).unwrap();
            assert_eq!(rec["tick"].as_u64().unwrap() as usize, line);
        }
    }
}

#[test]
fn seed_override_is_noted() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&[&"run", &common::data_path("scenarios/baseline.toml"), &"--seed", &"99", &"--out", &dir.path()]);
    assert_eq!(out.status.code(), Some(0));
    let report = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("seed         99 (overridden on the command line)"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 99);
}

#[test]
fn missing_knob_exits_2_naming_field() {
    let dir = tempfile::tempdir().unwrap();
    let src = std::fs::read_to_string(common::data_path("scenarios/baseline.toml")).unwrap();
    let broken: String = src.lines().filter(|l| !l.starts_with("capability_echo")).map(|l| format!("{l}\n")).collect();
    let path = dir.path().join("broken.toml");
    std::fs::write(&path, broken).unwrap();
    for out in [bin(&[&"run", &path, &"--out", &dir.path()]), bin(&[&"validate", &path])] {
        assert_eq!(out.status.code(), Some(2));
        assert!(text(&out.stderr).contains("knobs.capability_echo"), "{}", text(&out.stderr));
    }
}

#[test]
fn bad_value_and_unknown_field_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let src = std::fs::read_to_string(common::data_path("scenarios/baseline.toml")).unwrap();
    let bad = src.replace("handover_security = \"secure\"", "handover_security = \"sometimes\"");
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, bad).unwrap();
    let out = bin(&[&"validate", &path]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("knobs.handover_security"), "{}", text(&out.stderr));

    let extra = src.replace("ca_mode = true", "ca_mode = true\nfast_mode = true");
    std::fs::write(&path, extra).unwrap();
    let out = bin(&[&"validate", &path]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("fast_mode"), "{}", text(&out.stderr));
}

#[test]
fn missing_file_exits_2() {
    let out = bin(&[&"run", &"/nonexistent/scenario.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("cannot read"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(bin(&[&"frobnicate"]).status.code(), Some(2));
    assert_eq!(bin(&[&"run", &"x.toml", &"--seed", &"minus-one"]).status.code(), Some(2));
    assert_eq!(bin(&[&"--help"]).status.code(), Some(0));
}

#[test]
fn shipped_grid_matches_shipped_expectations() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&[
        &"matrix",
        &common::data_path("grids/defenses.toml"),
        &"--expect",
        &common::data_path("expectations/defenses.csv"),
        &"--workers",
        &"2",
        &"--out",
        &dir.path(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stdout));
    let stdout = text(&out.stdout);
    assert!(stdout.starts_with("config,fingerprint,supi_catch_passive,"));
    assert!(stdout.contains("all 80 cells match"));
    assert!(dir.path().join("matrix.csv").exists() && dir.path().join("matrix.json").exists());
}

#[test]
fn flipped_expectation_exits_1_with_one_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let src = std::fs::read_to_string(common::data_path("expectations/defenses.csv")).unwrap();
    let mut lines: Vec<String> = src.lines().map(str::to_string).collect();
    let row = &mut lines[3];
    let pos = row.rfind(",FAIL").or_else(|| row.rfind(",SUCCESS")).unwrap();
    let flipped = if row[pos..].starts_with(",FAIL") { ",SUCCESS" } else { ",FAIL" };
    row.replace_range(pos.., flipped);
    let path = dir.path().join("flipped.csv");
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    grid_vs(&path, 1, 1);
}

fn grid_vs(expect: &Path, code: i32, mismatches: usize) {
    let out = bin(&[&"matrix", &common::data_path("grids/defenses.toml"), &"--expect", &expect]);
    assert_eq!(out.status.code(), Some(code));
    let stdout = text(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("mismatch: ")).count(), mismatches, "{stdout}");
}

#[test]
fn grid_without_expectations_exits_0() {
    let out = bin(&[&"matrix", &common::data_path("grids/defenses.toml")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(text(&out.stdout).lines().count(), 17);
}

#[test]
fn cli_output_is_byte_identical() {
    let a = bin(&[&"matrix", &common::data_path("grids/defenses.toml"), &"--workers", &"1"]);
    let b = bin(&[&"matrix", &common::data_path("grids/defenses.toml"), &"--workers", &"4"]);
    assert_eq!(a.stdout, b.stdout);
}
