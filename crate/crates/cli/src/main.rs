//! `ffpat`: phantom generation, simulation, masking, reconstruction,
//! scoring, self-validation and benchmarking.

mod cmd;
mod config;
mod error;
mod layout;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::PipelineConfig;
use error::CliError;
use layout::Layout;

#[derive(Debug, Parser)]
#[command(
    name = "ffpat",
    version,
    about = "Fast k-space photoacoustic tomography toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate phantom volumes.
    Phantom,
    /// Simulate clean, masked and noisy sensor data for every phantom.
    Simulate,
    /// Write the detector sub-sampling mask.
    Mask,
    /// Reconstruct every simulated sample.
    Reconstruct {
        /// bp, tv, gd or learned; overrides recon.method.
        #[arg(long)]
        method: Option<String>,
    },
    /// Score stored reconstructions against their phantoms.
    Metrics,
    /// Run the operator and oracle self-checks.
    Validate,
    /// Time the operators on square 2D grids.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [32usize, 64, 128])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        reps: usize,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("FFPAT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "FFPAT_THREADS must be a positive integer, got '{raw}'"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Data(format!("thread pool: {e}")))
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("this command needs --config <json>".into()))?;
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<serde_json::Value, CliError> {
    configure_threads()?;
    let layout = Layout::new(&cli.out);
    match &cli.command {
        Command::Validate => cmd::validate::run(&layout),
        Command::Bench { sizes, reps } => cmd::bench::run(&layout, sizes, *reps),
        Command::Phantom => cmd::phantom::run(&load_config(cli)?, &layout),
        Command::Simulate => cmd::simulate::run(&load_config(cli)?, &layout),
        Command::Mask => cmd::mask::run(&load_config(cli)?, &layout),
        Command::Reconstruct { method } => {
            cmd::reconstruct::run(&load_config(cli)?, &layout, method.as_deref())
        }
        Command::Metrics => cmd::metrics::run(&load_config(cli)?, &layout),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            if !matches!(cli.command, Command::Bench { .. }) {
                let text = serde_json::to_string_pretty(&summary).expect("json");
                let _ = writeln!(std::io::stdout(), "{text}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("ffpat: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
