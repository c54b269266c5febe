//! Scenario-driven runs behind the `superheat` binary.
//!
//! A run reads one JSON scenario, dispatches to a pipeline and writes
//! `summary.json` and `table.csv` (plus grid dumps on request) into the
//! output directory. Exit codes: 0 success, 2 configuration error,
//! 3 numerical failure, 4 indeterminate verdict under `--strict`.

mod commands;
mod scenario;
mod sweep;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

pub use commands::{run_command, CommandOutput};
pub use scenario::{
    CertificateSpec, DataSpec, GridSpec, GrowthSpec, OutputSpec, Scenario, SolverKind, SweepSpec, TransformSpec, SCHEMA_VERSION,
};

use crate::classify::ClassifyError;
use crate::evolve::EvolveError;
use crate::grid::io::IoError;
use crate::grid::uloc::UlocError;
use crate::grid::GridError;
use crate::heat::HeatError;
use crate::nonlinearity::NonlinearityError;
use crate::singular::SingularError;
use crate::transforms::TransformError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("{module}: {message}")]
    Numeric { module: &'static str, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numeric { .. } => 3,
        }
    }
}

macro_rules! numeric_from {
    ($($t:ty => $m:literal),* $(,)?) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Numeric { module: $m, message: e.to_string() }
            }
        })*
    };
}

numeric_from!(
    EvolveError => "evolve",
    ClassifyError => "classify",
    TransformError => "transforms",
    HeatError => "heatkernel",
    UlocError => "uloc_grid",
    NonlinearityError => "nonlinearity",
);

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SingularError> for CliError {
    fn from(e: SingularError) -> Self {
        match e {
            SingularError::BadParameter(_) | SingularError::NotConvex(_) | SingularError::NotApplicable(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Numeric { module: "singular", message: other.to_string() },
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Classify,
    Simulate,
    Certify,
    TransformCheck,
    Norms,
    Contract,
    Sweep,
}

impl FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "classify" => Command::Classify,
            "simulate" => Command::Simulate,
            "certify" => Command::Certify,
            "transform-check" => Command::TransformCheck,
            "norms" => Command::Norms,
            "contract" => Command::Contract,
            "sweep" => Command::Sweep,
            other => return Err(CliError::Config(format!("unknown command '{other}'"))),
        })
    }
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::Simulate => "simulate",
            Command::Certify => "certify",
            Command::TransformCheck => "transform-check",
            Command::Norms => "norms",
            Command::Contract => "contract",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub jobs: usize,
    pub strict: bool,
}

/// A CSV table; every float is printed with 17 significant digits.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(t) if t.contains([',', '"', '\n']) => format!("\"{}\"", t.replace('"', "\"\"")),
            Cell::Text(t) => t.clone(),
        }
    }
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(Cell::render).collect();
            let _ = writeln!(s, "{}", line.join(","));
        }
        s
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    schema_version: u32,
    command: &'static str,
    status: &'static str,
    exit_code: i32,
    scenario: &'a Scenario,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<&'a serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<ErrorRecord>,
}

#[derive(Serialize)]
struct ErrorRecord {
    kind: &'static str,
    module: Option<&'static str>,
    message: String,
}

fn error_record(e: &CliError) -> ErrorRecord {
    match e {
        CliError::Config(m) => ErrorRecord { kind: "config", module: None, message: m.clone() },
        CliError::Io(m) => ErrorRecord { kind: "io", module: None, message: m.clone() },
        CliError::Numeric { module, message } => ErrorRecord { kind: "numeric", module: Some(module), message: message.clone() },
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Scenario::from_json(&text)
}

/// Runs `command` on `scenario`, writes the artifacts and returns the exit code.
pub fn run(command: Command, scenario: &Scenario, opts: &RunOptions) -> i32 {
    run_with_table(command, scenario, opts).0
}

fn run_with_table(command: Command, scenario: &Scenario, opts: &RunOptions) -> (i32, Option<Table>) {
    if let Err(e) = fs::create_dir_all(&opts.out) {
        eprintln!("error: cannot create {}: {e}", opts.out.display());
        return (2, None);
    }
    let outcome = if command == Command::Sweep { sweep::run_sweep(scenario, opts) } else { run_command(command, scenario, &opts.out) };
    let (code, result, error, table) = match outcome {
        Ok(out) => {
            let code = if opts.strict && out.indeterminate { 4 } else { 0 };
            (code, Some(out.json), None, Some(out.table))
        }
        Err(e) => {
            eprintln!("error: {e}");
            (e.exit_code(), None, Some(error_record(&e)), None)
        }
    };
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        command: command.name(),
        status: match code {
            0 => "ok",
            4 => "indeterminate",
            _ => "failed",
        },
        exit_code: code,
        scenario,
        result: result.as_ref(),
        error,
    };
    let write = || -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(opts.out.join("summary.json"), text + "\n")?;
        if let Some(t) = &table {
            fs::write(opts.out.join("table.csv"), t.to_csv())?;
        }
        Ok(())
    };
    if let Err(e) = write() {
        eprintln!("error: {e}");
        return (2, table);
    }
    (code, table)
}
