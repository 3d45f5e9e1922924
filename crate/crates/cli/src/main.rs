//! `crn`: analyze, simulate and verify first-order reaction-diffusion
//! networks described in the `.crn` text format.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crn_core::{analyze_on_grid, parse_network, simulate, sim::resolve_grid, CrnError, ReactionNetwork, SolverConfig, TimeScheme};

#[derive(Parser)]
#[command(name = "crn", version, about = "First-order reaction-diffusion network analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Structure, balance and equilibrium report as JSON.
    Analyze {
        path: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Simulate and write the entropy trace as CSV.
    Simulate {
        path: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Analyze, simulate and run every applicable check; exit 1 if any fails.
    Verify {
        path: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        /// Write the verdict here instead of stdout.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Also write the trace CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = SolverConfig::default().dt)]
    dt: f64,
    #[arg(long = "t-end", default_value_t = SolverConfig::default().t_end)]
    t_end: f64,
    /// Number of grid cells (overrides the file's `grid` statement).
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long = "sample-every", default_value_t = SolverConfig::default().sample_every)]
    sample_every: usize,
    /// `be` (backward Euler) or `cn` (Crank-Nicolson).
    #[arg(long, default_value = "be")]
    scheme: TimeScheme,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            dt: self.dt,
            t_end: self.t_end,
            sample_every: self.sample_every,
            scheme: self.scheme,
            grid_cells: self.grid,
            ..SolverConfig::default()
        }
    }
}

#[derive(Serialize)]
struct RunManifest {
    input_sha256: String,
    network_hash: String,
    config: SolverConfig,
    tool_version: &'static str,
    /// Hash of every field above; the timestamp is excluded.
    content_sha256: String,
    timestamp_unix: u64,
}

#[derive(Serialize)]
struct HashedManifest<'a> {
    input_sha256: &'a str,
    network_hash: &'a str,
    config: &'a SolverConfig,
    tool_version: &'a str,
}

enum Failure {
    Usage(anyhow::Error),
    Domain(CrnError),
    Io(anyhow::Error),
}

impl From<CrnError> for Failure {
    fn from(e: CrnError) -> Self {
        Failure::Domain(e)
    }
}

struct Input {
    bytes: Vec<u8>,
    net: ReactionNetwork,
}

fn read_input(path: &Path) -> Result<Input, Failure> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display())).map_err(Failure::Usage)?;
    let text = String::from_utf8(bytes.clone())
        .with_context(|| format!("{} is not UTF-8", path.display()))
        .map_err(Failure::Usage)?;
    let net = parse_network(&text)?;
    Ok(Input { bytes, net })
}

fn emit(target: Option<&Path>, content: &str) -> Result<(), Failure> {
    match target {
        Some(p) => fs::write(p, content).with_context(|| format!("cannot write {}", p.display())).map_err(Failure::Io),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes()).and_then(|_| out.flush()).context("cannot write stdout").map_err(Failure::Io)
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn write_manifest(path: &Path, input: &Input, config: &SolverConfig) -> Result<(), Failure> {
    let input_sha256 = hex::encode(Sha256::digest(&input.bytes));
    let network_hash = input.net.content_hash();
    let tool_version = env!("CARGO_PKG_VERSION");
    let hashed = HashedManifest { input_sha256: &input_sha256, network_hash: &network_hash, config, tool_version };
    let content_sha256 = hex::encode(Sha256::digest(serde_json::to_vec(&hashed).expect("manifest serializes")));
    let timestamp_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let manifest =
        RunManifest { input_sha256, network_hash, config: *config, tool_version, content_sha256, timestamp_unix };
    emit(Some(path), &to_json(&manifest))
}

fn run(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Analyze { path, json } => {
            let input = read_input(&path)?;
            let grid = resolve_grid(&input.net, &SolverConfig::default())?;
            let analysis = analyze_on_grid(&input.net, grid)?;
            emit(json.as_deref(), &to_json(&analysis.report(&input.net)))?;
            Ok(true)
        }
        Command::Simulate { path, solver, out, manifest } => {
            let input = read_input(&path)?;
            let config = solver.config();
            config.validate()?;
            let analysis = analyze_on_grid(&input.net, resolve_grid(&input.net, &config)?)?;
            let run = simulate(&input.net, &config, &analysis.reference)?;
            emit(out.as_deref(), &run.trace.to_csv(input.net.species()))?;
            if let Some(m) = manifest {
                write_manifest(&m, &input, &config)?;
            }
            Ok(true)
        }
        Command::Verify { path, solver, json, out, manifest } => {
            let input = read_input(&path)?;
            let config = solver.config();
            let v = crn_core::verify(&input.net, &config)?;
            emit(json.as_deref(), &to_json(&v.verdict))?;
            if let Some(o) = out {
                emit(Some(&o), &v.run.trace.to_csv(input.net.species()))?;
            }
            if let Some(m) = manifest {
                write_manifest(&m, &input, &config)?;
            }
            Ok(v.verdict.passed)
        }
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    line: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Domain(e)) => {
            let line = match &e {
                CrnError::Parse(p) => Some(p.line),
                _ => None,
            };
            let report = ErrorReport { error: e.kind(), message: e.to_string(), line };
            eprint!("{}", to_json(&report));
            ExitCode::from(1)
        }
    }
}
