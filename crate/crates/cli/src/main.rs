mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ConfigFile;

/// Train, convert and simulate spiking networks with analog neuron models.
///
/// Every setting can also come from a `key = value` file given with
/// `--config`; flags take precedence. Exit codes: 0 success, 2 usage or
/// config error, 3 I/O error, 4 numeric failure.
#[derive(Debug, Parser)]
#[command(name = "spikesim", version)]
struct Cli {
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the LeNet-5-style ANN and write the model plus a per-epoch log.
    Train(TrainArgs),
    /// Normalize a trained ANN and write the spiking network.
    Convert(ConvertArgs),
    /// Simulate the spiking network on test images and write the error trace.
    Simulate(SimulateArgs),
    /// Run the two-input neutral-point network and write both trajectories.
    DemoNeutralPoint(DemoArgs),
    /// Simulate a rescaled voltage neuron for several stretch factors.
    SweepRescale(SweepArgs),
    /// Write membrane potential against input spike count for several models.
    Curves(CurvesArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Directory with the four MNIST IDX files [env: SPIKESIM_DATA].
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Network architecture (only `lenet5`).
    #[arg(long)]
    pub arch: Option<String>,
    /// Train on a seeded random subset of this many images.
    #[arg(long)]
    pub subset: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Model file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-epoch CSV log (default: next to the model).
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Trained ANN model file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Normalization method (only `data`).
    #[arg(long)]
    pub normalization: Option<String>,
    /// Collect activation statistics on this many training images (default all).
    #[arg(long)]
    pub norm_subset: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Spiking network file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Spiking network file.
    #[arg(long)]
    pub snn: Option<PathBuf>,
    /// Number of test images, taken from the front of the test set.
    #[arg(long)]
    pub images: Option<usize>,
    #[arg(long)]
    pub timesteps: Option<usize>,
    /// `poisson` or `constant_current`.
    #[arg(long)]
    pub input_mode: Option<String>,
    #[arg(long)]
    pub max_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `per_event`, `aggregated` or `simultaneous`.
    #[arg(long)]
    pub event_order: Option<String>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Channel-length-modulation strength of the voltage neuron.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Output file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// `ideal`, `voltage`, `time` or `table`.
    #[arg(long)]
    pub neuron: Option<String>,
    /// Gain of the time-domain neuron.
    #[arg(long)]
    pub gain: Option<f64>,
    /// Transfer-curve CSV for the table neuron.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// Stretch the neuron model: a factor, `fit`, or `none`.
    #[arg(long)]
    pub rescale: Option<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Comma-separated constant factors; a `fit` row is always added.
    #[arg(long)]
    pub factors: Option<String>,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Inhibitory weight magnitude; the excitatory weight is `w + eps`.
    #[arg(long)]
    pub w: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    /// Comma-separated models: ideal, voltage, time, table.
    #[arg(long)]
    pub models: Option<String>,
    /// Weight of every input spike.
    #[arg(long)]
    pub w: Option<f64>,
    /// Number of input spikes.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub gain: Option<f64>,
    #[arg(long)]
    pub curve: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file = match cli.config.as_deref().map(ConfigFile::load).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(e) => return fail(e),
    };
    let result = match cli.command {
        Command::Train(a) => commands::train(&file, a),
        Command::Convert(a) => commands::convert(&file, a),
        Command::Simulate(a) => commands::simulate(&file, a),
        Command::DemoNeutralPoint(a) => commands::demo(&file, a),
        Command::SweepRescale(a) => commands::sweep(&file, a),
        Command::Curves(a) => commands::curves(&file, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn fail(e: error::CliError) -> ExitCode {
    eprintln!("error: {e}");
    e.exit_code()
}
