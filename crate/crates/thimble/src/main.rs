use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use thimble::config::RunConfig;
use thimble::run::{run, Subcommand};
use thimble::RunError;

/// Picard-Lefschetz and saddle-point analysis of strong-field integrals.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[arg(value_enum)]
    command: Subcommand,
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override a configuration key, e.g. `--set scan.q=25`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory, replacing `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match go(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn go(cli: Cli) -> Result<(), RunError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| RunError::Config(e.to_string()))?;
    }
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| RunError::Config(format!("{}: {e}", cli.config.display())))?;
    let cfg = RunConfig::parse(&text, &cli.overrides)?;
    run(cli.command, cfg, cli.out)
}
