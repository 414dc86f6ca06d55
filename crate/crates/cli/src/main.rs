use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

use commands::{Failure, SpecialArgs};

const EXIT_CODES: &str = "\
Exit codes:
  0  success (every check passed, or the run completed)
  1  a verification or lifespan check failed
  2  invalid configuration, arguments or domain error
  3  solver instability (non-finite field without blow-up growth)
  4  every sweep entry was censored (no blow-up before t_max)
  5  I/O error while reading or writing files

Environment:
  BLOWUPLAB_THREADS  maximum number of worker threads";

/// Blow-up laboratory for u_tt - Δu + mu/(1+t) u_t + nu^2/(1+t)^2 u = |u_t|^p.
#[derive(Debug, Parser)]
#[command(name = "blowuplab", version, after_help = EXIT_CODES)]
struct Cli {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory (overrides `output_dir`); created if missing.
    #[arg(long, global = true, value_name = "DIR")]
    output: Option<PathBuf>,

    /// Print the default configuration and exit.
    #[arg(long)]
    print_defaults: bool,

    /// Number of grid levels for verify and sweep (overrides the config).
    #[arg(long, global = true, value_name = "N")]
    refinements: Option<u32>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every identity and inequality check and write the ledger.
    Verify,
    /// Integrate one run and write the trajectory and functional traces.
    Simulate,
    /// Measure blow-up times over the configured data sizes and fit the scaling.
    Sweep,
    /// Evaluate a special function.
    Special {
        #[command(subcommand)]
        which: SpecialArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.print_defaults {
        print!("{}", blowuplab_core::RunConfig::defaults_text());
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required (verify, simulate, sweep, special); see --help");
        return ExitCode::from(2);
    };
    if let Err(f) = commands::init_threads() {
        return report(f);
    }
    let result = (|| {
        let mut config = match &cli.config {
            Some(path) => blowuplab_core::RunConfig::load(path)?,
            None => blowuplab_core::RunConfig::default(),
        };
        if let Some(dir) = cli.output {
            config.output_dir = dir;
        }
        if let Some(n) = cli.refinements {
            config.solver.refinements = n;
        }
        match command {
            Command::Verify => commands::verify(&config),
            Command::Simulate => commands::simulate(&config),
            Command::Sweep => commands::sweep(&config),
            Command::Special { which } => commands::special(&config, which),
        }
    })();
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => report(f),
    }
}

fn report(f: Failure) -> ExitCode {
    eprintln!("error: {}", f.message);
    ExitCode::from(f.code)
}
