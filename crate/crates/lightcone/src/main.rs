use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use lightcone::{execute, Command, Invocation, RunConfig};

/// Perturbation fronts in anharmonic oscillator lattices.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,

    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,

    /// Output directory (overrides `out` in the config).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads; defaults to the number of cores.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = RunConfig::load(&cli.config).and_then(|config| {
        let inv = Invocation::new(config, cli.out, cli.seed, cli.jobs.map(|j| j as usize));
        execute(cli.command, &inv)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
