use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

mod commands;

/// Exact quadratic optimal transport, Brenier potentials and Monge map estimators.
#[derive(Debug, Parser)]
#[command(name = "brenier-ot", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Debug, Args)]
struct Common {
    /// Base seed; experiment commands default to the seed of their configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Format of tabular outputs.
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the discrete transport problem between two measure files.
    Solve(commands::SolveArgs),
    /// Build a Brenier potential from target atoms and dual offsets.
    Potential(commands::PotentialArgs),
    /// Evaluate a potential and its Monge map at points.
    Map(commands::MapArgs),
    /// Minimize the semi-dual objective over the target offsets.
    Semidual(commands::SemidualArgs),
    /// Map estimation rate experiment.
    Rates(commands::RatesArgs),
    /// Coupling estimation rate experiment.
    CouplingRates(commands::CouplingArgs),
    /// Check the gradient stability bounds on an instance.
    BoundsCheck(commands::BoundsArgs),
    /// Demonstrations producing plot-ready data.
    Demo(commands::DemoArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Potential(_) => "potential",
            Command::Map(_) => "map",
            Command::Semidual(_) => "semidual",
            Command::Rates(_) => "rates",
            Command::CouplingRates(_) => "coupling-rates",
            Command::BoundsCheck(_) => "bounds-check",
            Command::Demo(_) => "demo",
        }
    }
}

/// Failure of a command, split by exit code.
#[derive(Debug)]
enum Failure {
    Validation(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<brenier_ot::Error> for Failure {
    fn from(e: brenier_ot::Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

type CmdResult<T = ()> = Result<T, Failure>;

/// Output directory of one run plus everything the manifest records.
struct Run {
    out: PathBuf,
    format: OutFormat,
    seed: Option<u64>,
    outputs: Vec<String>,
    config: Value,
}

impl Run {
    /// Path of an output file, registered in the manifest.
    fn file(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_owned());
        self.out.join(name)
    }

    /// `stem.csv` or `stem.json` according to `--format`.
    fn table(&mut self, stem: &str) -> PathBuf {
        let ext = match self.format {
            OutFormat::Csv => "csv",
            OutFormat::Json => "json",
        };
        self.file(&format!("{stem}.{ext}"))
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> CmdResult {
        let path = self.file(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    library_version: &'static str,
    command: &'a str,
    args: Vec<String>,
    seed: Option<u64>,
    format: OutFormat,
    config: &'a Value,
    outputs: &'a [String],
    exit_code: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
    elapsed_ms: f64,
}

fn write_manifest(run: &Run, command: &str, failure: Option<&Failure>, elapsed_ms: f64) -> std::io::Result<()> {
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        library_version: brenier_ot::VERSION,
        command,
        args: std::env::args().skip(1).collect(),
        seed: run.seed,
        format: run.format,
        config: &run.config,
        outputs: &run.outputs,
        exit_code: failure.map_or(0, Failure::code),
        error: failure.map(Failure::message),
        elapsed_ms,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
    std::fs::write(run.out.join("manifest.json"), text + "\n")
}

fn ensure_dir(path: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(path)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            };
        }
    };
    let Common { seed, out, format } = cli.common;
    let mut run = Run {
        out,
        format,
        seed,
        outputs: Vec::new(),
        config: Value::Null,
    };
    let command = cli.command.name();
    let start = Instant::now();
    let result = ensure_dir(&run.out).map_err(Failure::from).and_then(|()| match cli.command {
        Command::Solve(a) => commands::solve(&mut run, a),
        Command::Potential(a) => commands::potential(&mut run, a),
        Command::Map(a) => commands::map(&mut run, a),
        Command::Semidual(a) => commands::semidual(&mut run, a),
        Command::Rates(a) => commands::rates(&mut run, a),
        Command::CouplingRates(a) => commands::coupling_rates(&mut run, a),
        Command::BoundsCheck(a) => commands::bounds_check(&mut run, a),
        Command::Demo(a) => commands::demo(&mut run, a),
    });
    let failure = result.err();
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    if let Err(e) = write_manifest(&run, command, failure.as_ref(), elapsed_ms) {
        eprintln!("error: cannot write manifest: {e}");
        if failure.is_none() {
            return ExitCode::from(2);
        }
    }
    match failure {
        None => ExitCode::SUCCESS,
        Some(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
