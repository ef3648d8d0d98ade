//! Command-line front end.
//!
//! ```text
//! fiveg-sim run <file> [--seed N] [--out DIR]
//! fiveg-sim matrix <grid> [--expect FILE] [--workers N] [--out DIR]
//! fiveg-sim validate <file>
//! ```
//!
//! Exit codes: 0 ok, 1 expectation mismatch, 2 invalid input.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::report;
use crate::simcore::{enumerate_outcomes, Expectations, Grid, ScenarioConfig, ScenarioError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fiveg-sim", version, about = "Deterministic 5G registration security simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario's benign procedure and listed attacks and write reports.
    Run {
        file: PathBuf,
        /// Replace the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Sweep a knob grid and print the outcome matrix.
    Matrix {
        grid: PathBuf,
        /// Expectations table to diff against.
        #[arg(long)]
        expect: Option<PathBuf>,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Also write matrix.csv and matrix.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and check a scenario file.
    Validate { file: PathBuf },
}

fn report_error(err: &mut dyn Write, e: &ScenarioError) {
    match e {
        ScenarioError::InvalidConfig(diags) => {
            for d in diags {
                let _ = writeln!(err, "error: {}: {}", d.field, d.message);
            }
        }
        other => {
            let _ = writeln!(err, "error: {other}");
        }
    }
}

fn write_file(dir: &Path, name: &str, contents: &str, err: &mut dyn Write) -> bool {
    let path = dir.join(name);
    match std::fs::write(&path, contents) {
        Ok(()) => true,
        Err(e) => {
            let _ = writeln!(err, "error: cannot write {}: {e}", path.display());
            false
        }
    }
}

fn cmd_run(file: &Path, seed: Option<u64>, out_dir: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let mut config = match ScenarioConfig::load(file) {
        Ok(c) => c,
        Err(e) => {
            report_error(err, &e);
            return EXIT_INVALID;
        }
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    let artifacts = match report::generate(&config, seed.is_some()) {
        Ok(a) => a,
        Err(e) => {
            report_error(err, &e);
            return EXIT_INVALID;
        }
    };
    if let Err(e) = std::fs::create_dir_all(out_dir) {
        let _ = writeln!(err, "error: cannot create {}: {e}", out_dir.display());
        return EXIT_INVALID;
    }
    let mut ok = true;
    for (name, t) in &artifacts.transcripts {
        ok &= write_file(out_dir, name, &t.to_jsonl(), err);
    }
    let text = artifacts.report.to_text();
    ok &= write_file(out_dir, "report.txt", &text, err);
    ok &= write_file(out_dir, "report.json", &artifacts.report.to_json(), err);
    if !ok {
        return EXIT_INVALID;
    }
    let _ = out.write_all(text.as_bytes());
    EXIT_OK
}

fn cmd_matrix(
    grid_path: &Path,
    expect: Option<&Path>,
    workers: usize,
    out_dir: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let grid = match Grid::load(grid_path) {
        Ok(g) => g,
        Err(e) => {
            report_error(err, &e);
            return EXIT_INVALID;
        }
    };
    let expectations = match expect.map(Expectations::load).transpose() {
        Ok(x) => x,
        Err(e) => {
            report_error(err, &e);
            return EXIT_INVALID;
        }
    };
    let matrix = match enumerate_outcomes(&grid, workers) {
        Ok(m) => m,
        Err(e) => {
            report_error(err, &e);
            return EXIT_INVALID;
        }
    };
    let csv = matrix.to_csv();
    let _ = out.write_all(csv.as_bytes());
    if let Some(dir) = out_dir {
        if std::fs::create_dir_all(dir).is_err()
            || !write_file(dir, "matrix.csv", &csv, err)
            || !write_file(dir, "matrix.json", &matrix.to_json(), err)
        {
            return EXIT_INVALID;
        }
    }
    let Some(expectations) = expectations else {
        return EXIT_OK;
    };
    let mismatches = matrix.diff(&expectations);
    for m in &mismatches {
        let _ = writeln!(out, "mismatch: {m}");
    }
    if mismatches.is_empty() {
        let _ = writeln!(out, "all {} cells match", matrix.rows.len() * matrix.attacks.len());
        EXIT_OK
    } else {
        let _ = writeln!(out, "{} mismatched cell(s)", mismatches.len());
        EXIT_MISMATCH
    }
}

fn cmd_validate(file: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match ScenarioConfig::load(file) {
        Ok(c) => {
            let _ = writeln!(out, "ok {} fingerprint {}", c.name, c.fingerprint());
            EXIT_OK
        }
        Err(e) => {
            report_error(err, &e);
            EXIT_INVALID
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(rendered.as_bytes()) } else { out.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match &cli.command {
        Command::Run { file, seed, out: dir } => cmd_run(file, *seed, dir, out, err),
        Command::Matrix { grid, expect, workers, out: dir } => {
            cmd_matrix(grid, expect.as_deref(), *workers, dir.as_deref(), out, err)
        }
        Command::Validate { file } => cmd_validate(file, out, err),
    }
}
