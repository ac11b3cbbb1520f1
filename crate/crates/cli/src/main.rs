use clap::Parser;
use slipctl::{run, CliError, Command, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

/// Optimal control of steady second-grade flows with slip boundaries.
#[derive(Debug, Parser)]
#[command(name = "slipctl", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration; the built-in benchmark when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parent directory of the run directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 1 keeps floating-point reductions reproducible.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated, strictly decreasing α list.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    alpha: Option<Vec<f64>>,
    #[arg(long)]
    nu: Option<f64>,
    /// Number of modes.
    #[arg(long)]
    m: Option<usize>,
}

fn execute(args: Args) -> Result<PathBuf, CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = args.out {
        cfg.out = out;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(alpha) = args.alpha {
        cfg.alpha = alpha;
    }
    if let Some(nu) = args.nu {
        cfg.nu = nu;
    }
    if let Some(m) = args.m {
        cfg.m = m;
    }
    if args.workers == 0 {
        return Err(CliError::config("--workers", "must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers)
        .build_global()
        .map_err(|e| CliError::Workers(e.to_string()))?;
    run(args.command, &cfg)
}

fn main() -> ExitCode {
    match execute(Args::parse()) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("slipctl: error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
