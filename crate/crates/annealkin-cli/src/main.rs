//! annealkin: annealed kinetic Langevin experiments from JSON configs.
//!
//! Exit codes: 0 on success, 1 for domain/runtime failures, 2 for config
//! problems (and clap usage errors). Diagnostics go to stderr; stdout stays
//! silent except for a one-line summary on a TTY.

use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use annealkin_cli::config::parse_config;
use annealkin_cli::runner::{execute, RunOptions};
use annealkin_cli::CliError;

#[derive(Parser)]
#[command(name = "annealkin", version, about = "Annealed kinetic Langevin experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate a landscape and report minima, depths, and critical height.
    Landscape(CommonArgs),
    /// Run an annealed trajectory ensemble and tabulate exceedance rates.
    Simulate(CommonArgs),
    /// Sweep the logarithmic cooling speed across the phase transition.
    Sweep(CommonArgs),
    /// Check the Gibbs sampler against quadrature references.
    GibbsCheck(CommonArgs),
    /// Certify local contraction at an equilibrium and estimate its radius.
    Lyapunov(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; defaults to ANNEALKIN_THREADS or hardware parallelism.
    #[arg(long)]
    threads: Option<usize>,
    /// Also write SVG charts beside the CSV artifacts.
    #[arg(long)]
    plot: bool,
    /// Override the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (kind, args) = match &cli.command {
        Command::Landscape(a) => ("landscape", a),
        Command::Simulate(a) => ("simulate", a),
        Command::Sweep(a) => ("sweep", a),
        Command::GibbsCheck(a) => ("gibbs-check", a),
        Command::Lyapunov(a) => ("lyapunov", a),
    };
    configure_threads(args.threads)?;
    let parsed = parse_config(&args.config)?;
    if parsed.request.kind() != kind {
        return Err(CliError::Config(format!(
            "config is a {} request but the subcommand is {kind}",
            parsed.request.kind(),
        )));
    }
    let outputs = execute(
        &parsed,
        &RunOptions { out_dir: args.out.clone(), plot: args.plot, seed: args.seed },
    )?;
    if std::io::stdout().is_terminal() {
        println!("{kind}: wrote {} file(s) to {}", outputs.len(), args.out.display());
    }
    Ok(())
}

fn configure_threads(flag: Option<usize>) -> Result<(), CliError> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("ANNEALKIN_THREADS") {
            Ok(s) => Some(s.trim().parse::<usize>().map_err(|_| {
                CliError::Config(format!(
                    "ANNEALKIN_THREADS must be a positive integer, got `{s}`"
                ))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Config("thread count must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Domain(format!("thread pool init failed: {e}")))?;
    }
    Ok(())
}
