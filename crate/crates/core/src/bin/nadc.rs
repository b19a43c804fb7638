//! Command-line driver for the Hopfield ADC toolkit.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use nadc_core::config::{load_config_file, RunConfig};
use nadc_core::run::{run, Subcommand};
use nadc_core::Error;

#[derive(Parser)]
#[command(
    name = "nadc",
    about = "Level-shifted Hopfield neural ADC simulator",
    after_help = "Subcommands: synth, settle, sweep, calibrate, quantize, train, eval, energy, pipeline\n\
                  Env: NADC_THREADS limits the sweep worker pool.\n\
                  Exit codes: 0 success, 2 config error, 3 numeric error, 4 calibration failure."
)]
struct Cli {
    /// Subcommand to run.
    subcommand: String,

    /// JSON config file; absent keys take the built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory for CSV/JSON results.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Override the number of sweep points.
    #[arg(long)]
    points: Option<usize>,

    /// Tabular output format (only csv is supported).
    #[arg(long, default_value = "csv")]
    format: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(message) => {
            println!("{message}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            let kind = match &err {
                Error::Config(_) | Error::Parameter(_) => "config",
                Error::NumericOverflow { .. } => "numeric",
                Error::CalibrationFailure(_) => "calibration",
                Error::Data(_) => "data",
                Error::Metrics(_) => "metrics",
                Error::Domain(_) => "domain",
                Error::Io(_) => "io",
            };
            eprintln!(
                "{}",
                serde_json::json!({"error": kind, "message": err.to_string()})
            );
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn execute(cli: &Cli) -> Result<String, Error> {
    if cli.format != "csv" {
        return Err(Error::Config(format!(
            "format: only \"csv\" is supported, got {:?}",
            cli.format
        )));
    }
    let sub: Subcommand = cli.subcommand.parse()?;
    let mut config = match &cli.config {
        Some(path) => load_config_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(points) = cli.points {
        config.points = points;
    }
    if let Ok(threads) = std::env::var("NADC_THREADS") {
        let n: usize = threads.parse().map_err(|_| {
            Error::Config(format!("NADC_THREADS must be an integer, got {threads:?}"))
        })?;
        if n > 0 {
            // Ignore failure: the global pool may already exist.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
    let summary = run(sub, &config, &cli.out)?;
    Ok(summary.message)
}
