//! Scenario runner behind the `diode-qopt` binary.

pub mod config;
pub mod output;
pub mod scenarios;

use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;
use serde_json::Value;
use sha2::{Digest, Sha256};

use config::{RunConfig, Scenario};
use output::{write_json, Summary};
use scenarios::Artifacts;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("optimizer infeasible: {0}")]
    Infeasible(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Infeasible(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<diode_qopt::Error> for CliError {
    fn from(e: diode_qopt::Error) -> Self {
        use diode_qopt::Error as E;
        match e {
            E::Infeasible { .. } | E::DegenerateConstraint { .. } => CliError::Infeasible(e.to_string()),
            E::InvalidParameter(_) => CliError::Config(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "diode-qopt", version, about = "Diode electrostatics and spin-defect linewidth optimization")]
pub struct Cli {
    #[arg(value_enum)]
    pub scenario: Scenario,
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Recorded in the summary; the pipeline itself is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for parallel solves (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Run one scenario and write its artifacts. The summary is written even
/// when the scenario fails, as long as the output directory exists.
pub fn run(cli: &Cli) -> Result<PathBuf, CliError> {
    let start = Instant::now();
    let (cfg, raw) = RunConfig::load(&cli.config, cli.scenario)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut out = Artifacts { dir, files: vec![] };

    log::info!("running {} with {} grid nodes", cli.scenario.as_str(), cfg.grid.n_points);
    let result: Result<Value, (CliError, Option<Value>)> = match cli.scenario {
        Scenario::Solve => scenarios::solve(&cfg, &mut out).map_err(|e| (e, None)),
        Scenario::Linewidth => scenarios::linewidth(&cfg, &mut out).map_err(|e| (e, None)),
        Scenario::Leakage => scenarios::leakage(&cfg, &mut out).map_err(|e| (e, None)),
        Scenario::Sweep => scenarios::sweep(&cfg, &mut out).map_err(|e| (e, None)),
        Scenario::Optimize => scenarios::run_optimize(&cfg, &mut out),
    };

    let (status, error, results) = match &result {
        Ok(v) => ("ok", None, v.clone()),
        Err((e, partial)) => ("failed", Some(e.to_string()), partial.clone().unwrap_or(Value::Null)),
    };
    let summary = Summary {
        scenario: cli.scenario.as_str(),
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: hex(&Sha256::digest(&raw)),
        wall_time_s: start.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
        seed: cli.seed,
        status,
        error,
        files: out.names(),
        results,
    };
    write_json(&out.dir, "summary.json", &summary)?;
    match result {
        Ok(_) => Ok(out.dir),
        Err((e, _)) => Err(e),
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
