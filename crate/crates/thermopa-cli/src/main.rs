//! `thermopa` — command-line driver.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical abort,
//! 4 non-converged truncation, 5 I/O failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thermopa::config::RunConfig;
use thermopa::runs::{self, RunOutput};
use thermopa::thermal::{Method, StateFilter};

#[derive(Parser, Debug)]
#[command(name = "thermopa", version, about = "Thermal femtosecond photoassociation runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (flat `block.key = value` file).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override `ensemble.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Single worker thread; output is then bitwise reproducible.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Override `ensemble.method`: grid, eigen, gaussian (= gaussian-projected) or gaussian-propagated.
    #[arg(long, global = true)]
    method: Option<Method>,
    /// Override `ensemble.filter`: all, no-bound or no-bound-no-resonance.
    #[arg(long, global = true)]
    filter: Option<StateFilter>,
    /// Override `outputs.directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Thermal pair density ρ(R)/R².
    ThermalDensity,
    /// Pump the thermal ensemble: per-J yields, purity, coherence, density matrix.
    Photoassociate,
    /// Shape resonances of the ground curve over J.
    Resonances,
    /// Box and classical partition functions.
    Partition,
    /// Purity and coherence against pulse intensity.
    PurityScan,
}

fn load(cli: &Cli) -> thermopa::Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| thermopa::Error::Config("--config PATH is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.ensemble.seed = s;
    }
    if let Some(m) = cli.method {
        cfg.ensemble.method = m;
    }
    if let Some(f) = cli.filter {
        cfg.ensemble.filter = f;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> thermopa::Result<RunOutput> {
    let cfg = load(cli)?;
    let det = cli.deterministic;
    match cli.command {
        Command::ThermalDensity => runs::run_thermal_density(&cfg, det),
        Command::Photoassociate => runs::run_photoassociate(&cfg, det),
        Command::Resonances => runs::run_resonance_scan(&cfg, det),
        Command::Partition => runs::run_partition(&cfg, det),
        Command::PurityScan => runs::run_purity_scan(&cfg, det),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            for f in &out.files {
                println!("{}", f.display());
            }
            println!("{}", out.manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("thermopa: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
