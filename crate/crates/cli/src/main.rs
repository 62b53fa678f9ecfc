use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use coefid_cli::{run::run, CliError, Mode, RunConfig};

/// Recover a time-dependent coefficient from one scalar measurement.
#[derive(Debug, Parser)]
#[command(name = "coefid", version)]
struct Args {
    /// Run configuration (flat key = value file).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the `mode` key: forward, invert, roundtrip or convergence.
    #[arg(long, value_parser = |s: &str| s.parse::<Mode>())]
    mode: Option<Mode>,
    /// Worker threads for kernel assembly (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the `out` key.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn execute(args: &Args) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|source| CliError::Read {
        path: args.config.clone(),
        source,
    })?;
    let mut cfg = RunConfig::parse(&text, args.mode)?;
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(k) = args.threads {
        if k == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(k);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))?;
    let outcome = pool.install(|| run(&cfg))?;
    let mut lines: Vec<String> = outcome
        .files
        .iter()
        .map(|f| format!("wrote {}", f.display()))
        .collect();
    lines.extend(outcome.notes);
    Ok(lines)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
