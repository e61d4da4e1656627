//! Command-line harness around `ruingame-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // A NaN gap must count as a breach.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use ruingame_core::Execution;

pub use config::RunConfig;
pub use error::{exit, CliError};
use manifest::{sha256_hex, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "ruingame", version, about = "Risk-sensitive lifetime ruin: closed-form game, checks and Monte Carlo")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory (created if missing).
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,

    /// Worker threads for Monte Carlo; defaults to all cores.
    #[arg(long, global = true, value_name = "K", env = "RUINGAME_WORKERS")]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Tabulate U and pi* on the configured grid.
    Value,
    /// Check the HJB residual of U at interior points.
    HjbCheck,
    /// Game cost of several policies against the saddle control.
    GameCost,
    /// Estimate J^n for one n.
    Simulate,
    /// Estimate J^n over a list of n.
    Convergence,
    /// Check the problem's standing assumptions.
    Validate,
    /// Solve the discrete game by value iteration and compare with U.
    Oracle,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Value => "value",
            Command::HjbCheck => "hjb-check",
            Command::GameCost => "game-cost",
            Command::Simulate => "simulate",
            Command::Convergence => "convergence",
            Command::Validate => "validate",
            Command::Oracle => "oracle",
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Runs a parsed command line and returns the process exit status.
/// Diagnostics go to standard error.
pub fn run(cli: &Cli) -> u8 {
    match execute(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<u8, CliError> {
    let started = Instant::now();
    let config_path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let (cfg, raw) = RunConfig::load(config_path)?;

    let workers = match cli.workers {
        Some(0) => return Err(CliError::Usage("--workers must be at least 1".into())),
        Some(k) => k,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {workers} workers: {e}")))?;
    let exec = Execution::Parallel;

    let output = pool.install(|| match cli.command {
        Command::Value => commands::value(&cfg),
        Command::HjbCheck => commands::hjb_check(&cfg),
        Command::GameCost => commands::game_cost_cmd(&cfg),
        Command::Simulate => commands::simulate(&cfg, exec),
        Command::Convergence => commands::convergence(&cfg, exec),
        Command::Validate => commands::validate(&cfg),
        Command::Oracle => commands::oracle(&cfg),
    })?;

    std::fs::create_dir_all(&cli.out).map_err(io_err(&cli.out))?;
    let mut checksums = BTreeMap::new();
    for table in &output.tables {
        let text = table.write_to(&cli.out).map_err(io_err(&cli.out))?;
        checksums.insert(format!("{}.csv", table.name), sha256_hex(text.as_bytes()));
    }
    if let Some((name, value)) = &output.summary {
        let mut text = serde_json::to_string_pretty(value).expect("summaries serialize");
        text.push('\n');
        let path = cli.out.join(name);
        std::fs::write(&path, &text).map_err(io_err(&path))?;
        checksums.insert(name.to_string(), sha256_hex(text.as_bytes()));
    }

    for w in &output.warnings {
        eprintln!("warning: {w}");
    }
    for b in &output.breaches {
        eprintln!("threshold breach: {b}");
    }
    let code = if output.invalid {
        exit::VALIDATION
    } else if !output.breaches.is_empty() {
        exit::BREACH
    } else {
        exit::OK
    };

    let manifest = RunManifest {
        command: cli.command.name().to_string(),
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: sha256_hex(&raw),
        workers,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        exit_code: code,
        checksums,
        warnings: output.warnings,
        breaches: output.breaches,
    };
    let path = cli.out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(io_err(&path))?;
    Ok(code)
}
