use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use dmcv_cli::{exit, run, Command, ExperimentConfig, OutputFormat, RunError};

/// Discrete-phase CV-QKD simulator: figure data, key-rate tables and the
/// end-to-end key pipeline.
#[derive(Parser, Debug)]
#[command(name = "dmcv", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON config; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed (overrides protocol.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format (overrides output.format).
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Override any config field, e.g. `--set fig3.xi=0.05`. Repeatable.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
    /// Print the effective config and exit.
    #[arg(long)]
    print_config: bool,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, dmcv_cli::ConfigError> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    for s in &cli.overrides {
        config.set(s)?;
    }
    if let Some(seed) = cli.seed {
        config.protocol.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output.dir = out.to_string_lossy().into_owned();
    }
    if let Some(format) = cli.format {
        config.output.format = format;
    }
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("dmcv: config error: {e}");
            return ExitCode::from(exit::CONFIG_ERROR as u8);
        }
    };
    if cli.print_config {
        println!("{}", serde_json::to_string_pretty(&config).expect("config serialises"));
        return ExitCode::SUCCESS;
    }
    let outcome = match run(cli.command, &config) {
        Ok(o) => o,
        Err(RunError::Config(e)) => {
            eprintln!("dmcv: config error: {e}");
            return ExitCode::from(exit::CONFIG_ERROR as u8);
        }
        Err(e) => {
            eprintln!("dmcv: {e}");
            return ExitCode::from(exit::RUNTIME_ERROR as u8);
        }
    };
    let dir = PathBuf::from(&config.output.dir);
    match outcome.report.write(&dir, config.output.format) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
        }
        Err(e) => {
            eprintln!("dmcv: writing {}: {e}", dir.display());
            return ExitCode::from(exit::RUNTIME_ERROR as u8);
        }
    }
    if outcome.reconciliation_failed {
        eprintln!("dmcv: reconciliation failed; partial report written");
        return ExitCode::from(exit::RECONCILIATION_FAILURE as u8);
    }
    ExitCode::SUCCESS
}
