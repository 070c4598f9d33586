use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ndgreen_cli::config::RunConfig;
use ndgreen_cli::{cmd_bench, cmd_partition, cmd_solve, CliError};

/// Diagonal blocks of G^r and G^< by nested dissection, with RGF and dense
/// reference solvers.
#[derive(Parser)]
#[command(name = "ndgreen", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads over energy points; defaults to NDGREEN_THREADS, then
    /// the number of cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Density, LDOS and line density over the energy grid.
    Solve(Common),
    /// Ledger counts and wall time over a size sweep.
    Bench(Common),
    /// Separator tree and its validation report.
    Partition(Common),
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if let Some(k) = flag {
        return Ok(Some(k));
    }
    match std::env::var("NDGREEN_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Config(format!("NDGREEN_THREADS must be a positive integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

type Handler = fn(&RunConfig, &std::path::Path) -> Result<(), CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, cmd): (&Common, Handler) = match &cli.command {
        Command::Solve(c) => (c, cmd_solve),
        Command::Bench(c) => (c, cmd_bench),
        Command::Partition(c) => (c, cmd_partition),
    };
    if let Some(k) = threads(common.threads)? {
        if k == 0 {
            return Err(CliError::Config("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {k} threads: {e}")))?;
    }
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cmd(&cfg, &common.out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ndgreen: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
