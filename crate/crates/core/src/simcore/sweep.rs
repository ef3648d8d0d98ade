//! Configuration-grid sweep producing the outcome matrix.
//!
//! A grid file names a base scenario and a list of knob axes. The sweep
//! expands the cartesian product (first axis outermost), runs every attack
//! against every configuration, and collects the verdicts. Runs share nothing
//! mutable, so they fan out across a rayon pool.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{execute_attack, AttackError, AttackKind, Verdict};

use super::scenario::{invalid, Diagnostic, ScenarioConfig, ScenarioError, SCENARIO_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    /// Knob name, dotted for nested knobs (`up_policy.integrity`).
    pub knob: String,
    pub values: Vec<toml::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub version: String,
    /// Base scenario, relative to the grid file.
    pub base: PathBuf,
    pub attacks: Vec<AttackKind>,
    pub axes: Vec<Axis>,
}

/// A grid with its base scenario loaded.
#[derive(Debug, Clone)]
pub struct Grid {
    pub base: ScenarioConfig,
    pub attacks: Vec<AttackKind>,
    pub axes: Vec<Axis>,
}

fn value_label(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl Grid {
    pub fn new(base: ScenarioConfig, attacks: Vec<AttackKind>, axes: Vec<Axis>) -> Self {
        Self { base, attacks, axes }
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Io { path: path.display().to_string(), message: e.to_string() })?;
        let de = toml::Deserializer::new(&text);
        let file: GridFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            ScenarioError::InvalidConfig(vec![Diagnostic { field, message: e.inner().message().to_string() }])
        })?;
        if file.version != SCENARIO_VERSION {
            return Err(invalid("version", &format!("expected {SCENARIO_VERSION:?}")));
        }
        let base_path = path.parent().unwrap_or(Path::new(".")).join(&file.base);
        let base = ScenarioConfig::load(&base_path)?;
        let grid = Self::new(base, file.attacks, file.axes);
        grid.configs()?;
        Ok(grid)
    }

    /// Expanded configurations with their row labels.
    pub fn configs(&self) -> Result<Vec<(String, ScenarioConfig)>, ScenarioError> {
        let base = toml::Value::try_from(&self.base).expect("config serializes");
        let mut rows: Vec<(Vec<String>, toml::Value)> = vec![(Vec::new(), base)];
        for (i, axis) in self.axes.iter().enumerate() {
            if axis.values.is_empty() {
                return Err(invalid(&format!("axes[{i}].values"), "axis has no values"));
            }
            let mut next = Vec::with_capacity(rows.len() * axis.values.len());
            for (labels, value) in &rows {
                for v in &axis.values {
                    let mut value = value.clone();
                    set_knob(&mut value, &axis.knob)
                        .ok_or_else(|| invalid(&format!("axes[{i}].knob"), &format!("unknown knob {:?}", axis.knob)))?
                        .clone_from(v);
                    let mut labels = labels.clone();
                    labels.push(format!("{}={}", axis.knob, value_label(v)));
                    next.push((labels, value));
                }
            }
            rows = next;
        }
        let mut out = Vec::with_capacity(rows.len());
        for (labels, value) in rows {
            let mut cfg = ScenarioConfig::from_toml_value(value).map_err(|e| match e {
                ScenarioError::InvalidConfig(d) => ScenarioError::InvalidConfig(
                    d.into_iter()
                        .map(|d| Diagnostic { field: d.field, message: format!("{} (grid row {})", d.message, labels.join(";")) })
                        .collect(),
                ),
                other => other,
            })?;
            cfg.attacks = self.attacks.clone();
            out.push((labels.join(";"), cfg));
        }
        Ok(out)
    }
}

fn set_knob<'a>(scenario: &'a mut toml::Value, knob: &str) -> Option<&'a mut toml::Value> {
    let mut cur = scenario.get_mut("knobs")?;
    for part in knob.split('.') {
        cur = cur.get_mut(part)?;
    }
    Some(cur)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cell {
    #[serde(rename = "SUCCESS")]
    Success,
    #[serde(rename = "FAIL")]
    Fail,
    /// The attacker lacks a capability the attack needs.
    #[serde(rename = "UNSUPPORTED")]
    Unsupported,
}

impl Cell {
    pub fn label(self) -> &'static str {
        match self {
            Cell::Success => "SUCCESS",
            Cell::Fail => "FAIL",
            Cell::Unsupported => "UNSUPPORTED",
        }
    }
}

impl From<Verdict> for Cell {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Success => Cell::Success,
            Verdict::Fail => Cell::Fail,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Cell {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "SUCCESS" => Ok(Cell::Success),
            "FAIL" => Ok(Cell::Fail),
            "UNSUPPORTED" => Ok(Cell::Unsupported),
            other => Err(format!("unknown verdict {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub config: String,
    pub fingerprint: String,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeMatrix {
    pub attacks: Vec<AttackKind>,
    pub rows: Vec<MatrixRow>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub config: String,
    pub attack: String,
    pub expected: String,
    pub actual: String,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} / {}: expected {}, got {}", self.config, self.attack, self.expected, self.actual)
    }
}

impl OutcomeMatrix {
    pub fn cell(&self, config: &str, attack: AttackKind) -> Option<Cell> {
        let col = self.attacks.iter().position(|a| *a == attack)?;
        self.rows.iter().find(|r| r.config == config).map(|r| r.cells[col])
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["config".to_string(), "fingerprint".to_string()];
        header.extend(self.attacks.iter().map(|a| a.id().to_string()));
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.config.clone(), r.fingerprint.clone()];
            rec.extend(r.cells.iter().map(|c| c.label().to_string()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix serializes") + "\n"
    }

    /// Cell-by-cell comparison against an expectations table with header
    /// `config,<attack ids…>`. Rows or columns present on only one side are
    /// reported as mismatches too.
    pub fn diff(&self, expectations: &Expectations) -> Vec<Mismatch> {
        let mut out = Vec::new();
        for r in &self.rows {
            let Some(exp) = expectations.rows.iter().find(|(c, _)| *c == r.config) else {
                out.push(Mismatch {
                    config: r.config.clone(),
                    attack: "*".into(),
                    expected: "(row missing)".into(),
                    actual: "(row present)".into(),
                });
                continue;
            };
            for (col, a) in self.attacks.iter().enumerate() {
                let expected = expectations.attacks.iter().position(|x| x == a.id()).map(|i| exp.1[i]);
                let actual = r.cells[col];
                if expected != Some(actual) {
                    out.push(Mismatch {
                        config: r.config.clone(),
                        attack: a.id().to_string(),
                        expected: expected.map_or("(column missing)".to_string(), |c| c.to_string()),
                        actual: actual.to_string(),
                    });
                }
            }
        }
        for (config, _) in &expectations.rows {
            if !self.rows.iter().any(|r| &r.config == config) {
                out.push(Mismatch {
                    config: config.clone(),
                    attack: "*".into(),
                    expected: "(row present)".into(),
                    actual: "(row missing)".into(),
                });
            }
        }
        out
    }
}

/// Parsed expectations table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expectations {
    pub attacks: Vec<String>,
    pub rows: Vec<(String, Vec<Cell>)>,
}

impl Expectations {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| invalid("expectations", &e.to_string()))?.clone();
        if header.get(0) != Some("config") {
            return Err(invalid("expectations", "first column must be `config`"));
        }
        let attacks: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| invalid("expectations", &e.to_string()))?;
            let line = format!("expectations row {}", i + 1);
            let cells = rec
                .iter()
                .skip(1)
                .map(|c| c.parse::<Cell>().map_err(|e| invalid(&line, &e)))
                .collect::<Result<Vec<_>, _>>()?;
            if cells.len() != attacks.len() {
                return Err(invalid(&line, "wrong number of columns"));
            }
            rows.push((rec[0].to_string(), cells));
        }
        Ok(Self { attacks, rows })
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse(&text)
    }

    /// Renders a matrix in expectations form (no fingerprint column).
    pub fn from_matrix(m: &OutcomeMatrix) -> Self {
        Self {
            attacks: m.attacks.iter().map(|a| a.id().to_string()).collect(),
            rows: m.rows.iter().map(|r| (r.config.clone(), r.cells.clone())).collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["config".to_string()];
        header.extend(self.attacks.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for (config, cells) in &self.rows {
            let mut rec = vec![config.clone()];
            rec.extend(cells.iter().map(|c| c.label().to_string()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

fn run_cell(attack: AttackKind, cfg: &ScenarioConfig) -> Result<Cell, ScenarioError> {
    match execute_attack(attack, cfg) {
        Ok(o) => Ok(o.verdict.into()),
        Err(AttackError::UnsupportedAttackForConfig { .. }) => Ok(Cell::Unsupported),
        Err(AttackError::Scenario(e)) => Err(e),
    }
}

/// Runs every attack against every configuration of `grid`. `workers = 0`
/// uses rayon's default pool size.
pub fn enumerate_outcomes(grid: &Grid, workers: usize) -> Result<OutcomeMatrix, ScenarioError> {
    let configs = grid.configs()?;
    let jobs: Vec<(usize, usize)> =
        (0..configs.len()).flat_map(|r| (0..grid.attacks.len()).map(move |c| (r, c))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid("workers", &e.to_string()))?;
    let cells: Vec<Result<Cell, ScenarioError>> =
        pool.install(|| jobs.par_iter().map(|&(r, c)| run_cell(grid.attacks[c], &configs[r].1)).collect());
    let mut cells = cells.into_iter();
    let mut rows = Vec::with_capacity(configs.len());
    for (label, cfg) in &configs {
        let row: Vec<Cell> = cells.by_ref().take(grid.attacks.len()).collect::<Result<_, _>>()?;
        rows.push(MatrixRow { config: label.clone(), fingerprint: cfg.fingerprint(), cells: row });
    }
    Ok(OutcomeMatrix { attacks: grid.attacks.clone(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ScenarioConfig {
        ScenarioConfig::from_toml_str(include_str!("../../data/scenarios/grid_base.toml")).unwrap()
    }

    #[test]
    fn first_axis_outermost() {
        let axes = vec![
            Axis { knob: "ca_mode".into(), values: vec![false.into(), true.into()] },
            Axis { knob: "up_policy.integrity".into(), values: vec!["required".into(), "not-needed".into()] },
        ];
        let labels: Vec<String> = Grid::new(base(), vec![], axes).configs().unwrap().into_iter().map(|(l, _)| l).collect();
        assert_eq!(
            labels,
            [
                "ca_mode=false;up_policy.integrity=required",
                "ca_mode=false;up_policy.integrity=not-needed",
                "ca_mode=true;up_policy.integrity=required",
                "ca_mode=true;up_policy.integrity=not-needed",
            ]
        );
    }

    #[test]
    fn unknown_knob_and_bad_value_rejected() {
        let g = Grid::new(base(), vec![], vec![Axis { knob: "turbo".into(), values: vec![true.into()] }]);
        assert_eq!(g.configs().unwrap_err().diagnostics()[0].field, "axes[0].knob");
        let g = Grid::new(base(), vec![], vec![Axis { knob: "ca_mode".into(), values: vec!["maybe".into()] }]);
        assert_eq!(g.configs().unwrap_err().diagnostics()[0].field, "knobs.ca_mode");
    }

    #[test]
    fn diff_reports_each_cell() {
        let m = OutcomeMatrix {
            attacks: vec![AttackKind::SupiCatchPassive, AttackKind::BiddingDown],
            rows: vec![MatrixRow { config: "a=1".into(), fingerprint: "f".into(), cells: vec![Cell::Success, Cell::Fail] }],
        };
        let exp = Expectations::from_matrix(&m);
        assert!(m.diff(&exp).is_empty());
        let parsed = Expectations::parse(&exp.to_csv()).unwrap();
        assert_eq!(parsed, exp);
        let flipped = Expectations::parse("config,supi_catch_passive,bidding_down\na=1,SUCCESS,SUCCESS\nb=2,FAIL,FAIL\n").unwrap();
        let d = m.diff(&flipped);
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].attack, "bidding_down");
        assert_eq!(d[1].config, "b=2");
    }

    #[test]
    fn expectations_reject_unknown_verdicts() {
        assert!(Expectations::parse("config,x\na,MAYBE\n").is_err());
        assert!(Expectations::parse("cfg,x\na,FAIL\n").is_err());
    }
}
