//! Pipeline driver for the surface-aided OFDM link toolkit.
//!
//! Stages exchange self-describing binary dataset files; `pipeline` runs
//! everything from one seed. Every command prints the system dimensions,
//! the seed, and SHA-256 digests of its inputs and outputs.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::{FileConfig, ScenarioFlags};

#[derive(Parser)]
#[command(name = "irslink", version, about = "Surface-aided OFDM link pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a ground-truth scenario file.
    Generate(GenerateArgs),
    /// Run the pilot phase over a scenario and record the measurements.
    Simulate(SimulateArgs),
    /// Estimate the per-element channels of every user from a pilots file.
    Estimate(EstimateArgs),
    /// Select per-user configurations maximizing the predicted rate.
    Optimize(OptimizeArgs),
    /// Score submitted configurations against the scenario ground truth.
    Evaluate(EvaluateArgs),
    /// Export a full-size (4096×50) submission matrix.
    Export(ExportArgs),
    /// Check a submission file against the shape and ±1 contract.
    Validate(ValidateArgs),
    /// Run generate → simulate → estimate → optimize → evaluate from one seed.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    scenario: ScenarioFlags,
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output scenario file.
    #[arg(long, default_value = "scenario.irsd")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Input scenario file.
    #[arg(long)]
    scenario: PathBuf,
    /// Pilot blocks of N configurations: 1 (plain Hadamard) or 4 (±-paired).
    #[arg(long)]
    repetitions: Option<usize>,
    /// Disable receiver noise.
    #[arg(long)]
    noiseless: bool,
    /// Pilot transmit power in W.
    #[arg(long)]
    power: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output pilots file.
    #[arg(long, default_value = "pilots.irsd")]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Input pilots file.
    #[arg(long)]
    pilots: PathBuf,
    /// Output estimates file.
    #[arg(long, default_value = "estimates.irsd")]
    out: PathBuf,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Input estimates file.
    #[arg(long)]
    estimates: PathBuf,
    /// Transmit power in W for the rate objective.
    #[arg(long)]
    power: Option<f64>,
    /// Noise PSD in W/Hz for the rate objective (default: the pilot-residual
    /// estimate stored per user).
    #[arg(long)]
    noise_psd: Option<f64>,
    /// Greedy refinement sweep budget.
    #[arg(long)]
    max_flip_passes: Option<usize>,
    /// Relative improvement below which refinement stops.
    #[arg(long)]
    improvement_tolerance: Option<f64>,
    /// Narrowband phase candidates (1 = exact sign-change enumeration).
    #[arg(long)]
    phase_grid_size: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output submission file (configurations + predicted rates).
    #[arg(long, default_value = "submission.irsd")]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Input scenario file (ground truth).
    #[arg(long)]
    scenario: PathBuf,
    /// Input submission file written by `optimize`.
    #[arg(long)]
    results: PathBuf,
    /// Estimates file, required with --oracle.
    #[arg(long)]
    estimates: Option<PathBuf>,
    /// Add an exhaustive-search baseline (element count ≤ 20).
    #[arg(long)]
    oracle: bool,
    /// Transmit power in W used for scoring.
    #[arg(long)]
    power: Option<f64>,
    /// Print the report as JSON instead of a table.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output report file.
    #[arg(long, default_value = "report.irsd")]
    out: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    /// Input submission file.
    #[arg(long)]
    results: PathBuf,
    /// Output bare submission matrix file.
    #[arg(long, default_value = "theta.irsd")]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// Submission file to check.
    #[arg(long)]
    file: PathBuf,
    /// Expected number of configurations (columns).
    #[arg(long, default_value_t = 50)]
    users: usize,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    scenario: ScenarioFlags,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    noiseless: bool,
    /// Transmit power in W (pilots, objective, and scoring).
    #[arg(long)]
    power: Option<f64>,
    /// Add an exhaustive-search baseline to the report (N ≤ 20).
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    max_flip_passes: Option<usize>,
    #[arg(long)]
    improvement_tolerance: Option<f64>,
    #[arg(long)]
    phase_grid_size: Option<usize>,
    /// Print the report as JSON instead of a table.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for all stage files.
    #[arg(long, default_value = "pipeline-out")]
    out: PathBuf,
}

fn check_repetitions(repetitions: usize) -> Result<()> {
    anyhow::ensure!(
        repetitions == 1 || repetitions == 4,
        "--repetitions must be 1 (plain Hadamard block) or 4 (±-paired blocks)"
    );
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate(args) => {
            let file = FileConfig::load(args.config.as_deref())?;
            let config = args.scenario.resolve(&file)?;
            commands::generate(&config, &args.out)
        }
        Command::Simulate(args) => {
            let file = FileConfig::load(args.config.as_deref())?;
            let repetitions = args.repetitions.or(file.repetitions).unwrap_or(1);
            check_repetitions(repetitions)?;
            let noiseless = args.noiseless || file.noiseless.unwrap_or(false);
            let power = args.power.or(file.power).unwrap_or(1.0);
            commands::simulate(&args.scenario, repetitions, noiseless, power, &args.out)
        }
        Command::Estimate(args) => commands::estimate(&args.pilots, &args.out),
        Command::Optimize(args) => {
            let file = FileConfig::load(args.config.as_deref())?;
            let overrides = commands::SearchOverrides {
                max_flip_passes: args.max_flip_passes.or(file.max_flip_passes),
                improvement_tolerance: args.improvement_tolerance.or(file.improvement_tolerance),
                phase_grid_size: args.phase_grid_size.or(file.phase_grid_size),
            };
            let power = args.power.or(file.power);
            let noise_psd = args.noise_psd.or(file.noise_psd);
            commands::optimize(&args.estimates, power, noise_psd, &overrides, &args.out)
        }
        Command::Evaluate(args) => {
            let file = FileConfig::load(args.config.as_deref())?;
            let power = args.power.or(file.power).unwrap_or(1.0);
            let oracle = args.oracle || file.oracle.unwrap_or(false);
            commands::evaluate(
                &args.scenario,
                &args.results,
                args.estimates.as_deref(),
                oracle,
                power,
                args.json,
                &args.out,
            )
        }
        Command::Export(args) => commands::export(&args.results, &args.out),
        Command::Validate(args) => commands::validate(&args.file, args.users),
        Command::Pipeline(args) => {
            let file = FileConfig::load(args.config.as_deref())?;
            let config = args.scenario.resolve(&file)?;
            let repetitions = args.repetitions.or(file.repetitions).unwrap_or(1);
            check_repetitions(repetitions)?;
            let noiseless = args.noiseless || file.noiseless.unwrap_or(false);
            let power = args.power.or(file.power).unwrap_or(1.0);
            let oracle = args.oracle || file.oracle.unwrap_or(false);
            let overrides = commands::SearchOverrides {
                max_flip_passes: args.max_flip_passes.or(file.max_flip_passes),
                improvement_tolerance: args.improvement_tolerance.or(file.improvement_tolerance),
                phase_grid_size: args.phase_grid_size.or(file.phase_grid_size),
            };
            commands::pipeline(
                &config,
                repetitions,
                noiseless,
                power,
                oracle,
                &overrides,
                args.json,
                &args.out,
            )
        }
    }
}
