//! `ndif`: train a diffusion model on conjunction position-uncertainty
//! series and forecast events by mask-conditioned inpainting.

mod commands;
mod config;
mod svg;

use clap::{Args, Parser, Subcommand};
use ndif_core::CoreError;
use std::path::PathBuf;
use std::process::ExitCode;

/// Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

#[derive(Parser)]
#[command(
    name = "ndif",
    version,
    about = "Diffusion-model forecasting of conjunction position uncertainty",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic event dataset with train/validation/test splits.
    GenData(GenDataArgs),
    /// Train the denoiser on a dataset and write a checkpoint.
    Train(TrainArgs),
    /// Draw unconditional series from a trained model.
    Sample(SampleArgs),
    /// Forecast one event past a cutoff with uncertainty bands.
    Forecast(ForecastArgs),
    /// Score baseline and diffusion forecasters on the test partition.
    Eval(EvalArgs),
    /// Render an event forecast as a static SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Optional TOML config; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run seed (falls back to config, then NDIF_SEED, then 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GenDataArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of events to generate.
    #[arg(long)]
    n_events: Option<usize>,
    /// Comma-separated train,validation,test fractions (must sum to 1).
    #[arg(long, value_parser = parse_fractions)]
    fractions: Option<(f64, f64, f64)>,
    /// Output directory for partition files and manifest.
    #[arg(long)]
    out: PathBuf,
    /// Overwrite an existing output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Dataset directory (from gen-data).
    #[arg(long)]
    data: PathBuf,
    /// Output directory for the checkpoint and loss log.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Continue training from an existing checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Checkpoint path.
    #[arg(long)]
    model: PathBuf,
    /// Output file: one row per sample, 168 comma-separated metres.
    #[arg(long)]
    out: PathBuf,
    /// Number of series to draw.
    #[arg(long, default_value_t = 8)]
    num_samples: usize,
    /// Directory for one SVG line plot per sample.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct ForecastArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Event to forecast (any partition).
    #[arg(long)]
    event_id: String,
    /// Days-to-TCA boundary between conditioning and forecast.
    #[arg(long, default_value_t = 2.0)]
    cutoff_days: f64,
    #[arg(long)]
    num_samples: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Also write the raw trajectory matrix.
    #[arg(long)]
    trajectories: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    cutoff_days: f64,
    #[arg(long)]
    num_samples: Option<usize>,
    /// Output CSV: model,cutoff_days,n,mae_m,rmse_m.
    #[arg(long)]
    out: PathBuf,
    /// Print per-event metric lines.
    #[arg(long)]
    per_event: bool,
}

#[derive(Args)]
struct PlotArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    event_id: String,
    #[arg(long, default_value_t = 2.0)]
    cutoff_days: f64,
    #[arg(long)]
    num_samples: Option<usize>,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
}

fn parse_fractions(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected three comma-separated fractions".to_string());
    }
    let mut v = [0.0; 3];
    for (i, p) in parts.iter().enumerate() {
        v[i] = p.trim().parse().map_err(|_| format!("'{p}' is not a number"))?;
    }
    Ok((v[0], v[1], v[2]))
}

/// A usage error detected past argument parsing.
pub struct UsageError(pub String);

pub enum CliError {
    Usage(String),
    Core(CoreError),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<UsageError> for CliError {
    fn from(e: UsageError) -> Self {
        CliError::Usage(e.0)
    }
}

fn main() -> ExitCode {
    ndif_core::tune_allocator();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::GenData(args) => commands::gen_data::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Sample(args) => commands::sample::run(args),
        Command::Forecast(args) => commands::forecast::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Plot(args) => commands::plot::run(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Core(e)) => {
            eprintln!("error: {e}");
            let code = match &e {
                CoreError::Config(_) => EXIT_USAGE,
                CoreError::Data(_) | CoreError::Format(_) | CoreError::Io(_) => EXIT_DATA,
                CoreError::Shape(_) | CoreError::Numeric(_) => EXIT_NUMERIC,
            };
            ExitCode::from(code)
        }
    }
}
