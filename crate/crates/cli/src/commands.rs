//! Stage implementations behind the subcommands. Every stage prints the
//! dims, the seed, and a SHA-256 digest for each file it reads or writes.

use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use irslink_core::dataset::{
    configurations_from_matrix, estimates_from_file, estimates_to_file, pilots_from_file,
    pilots_to_file, report_to_file, scenario_from_file, scenario_to_file, submission_from_file,
    submission_to_file, validate_submission, DatasetFile, EstimateMeta, PilotsMeta, ResultMeta,
};
use irslink_core::estimator::estimate_channel;
use irslink_core::evaluator::{compare_report, standard_baselines, RateReport};
use irslink_core::optimizer::{
    exhaustive_oracle, export_submission, optimize_wideband, submission_matrix,
    ConfigurationResult, OptimizationSettings,
};
use irslink_core::simulator::{
    build_hadamard_pilots, generate_scenario, simulate_pilot_phase, ScenarioConfig,
};
use irslink_core::{IrsConfiguration, SystemDims};

fn digest(path: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    let mut file = std::fs::File::open(path)
        .with_context(|| format!("opening {} for digest", path.display()))?;
    std::io::copy(&mut file, &mut hasher)?;
    Ok(hex_string(&hasher.finalize()))
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn print_dims(dims: &SystemDims) {
    println!(
        "dims: K={} M={} N={}",
        dims.subcarriers(),
        dims.taps(),
        dims.elements()
    );
}

fn print_input(path: &Path) -> Result<()> {
    println!("input: {} sha256={}", path.display(), digest(path)?);
    Ok(())
}

fn write_and_print(file: &DatasetFile, path: &Path) -> Result<()> {
    file.write_to(path)?;
    println!("output: {} sha256={}", path.display(), digest(path)?);
    Ok(())
}

fn read_and_print(path: &Path) -> Result<DatasetFile> {
    let file = DatasetFile::read_from(path)?;
    print_input(path)?;
    Ok(file)
}

pub fn generate(config: &ScenarioConfig, out: &Path) -> Result<()> {
    print_dims(&config.dims);
    println!("seed: {}", config.seed);
    let scenario = generate_scenario(config)?;
    println!(
        "noise psd: {:.6e} W/Hz{}",
        scenario.noise_psd(),
        if config.noise_psd.is_none() { " (calibrated)" } else { "" }
    );
    write_and_print(&scenario_to_file(&scenario)?, out)
}

pub fn simulate(
    scenario_path: &Path,
    repetitions: usize,
    noiseless: bool,
    power: f64,
    out: &Path,
) -> Result<()> {
    let scenario = scenario_from_file(&read_and_print(scenario_path)?)?;
    let config = scenario.config().clone();
    print_dims(&config.dims);
    println!("seed: {}", config.seed);

    let pilots = build_hadamard_pilots(&config.dims, repetitions)?;
    let dataset = simulate_pilot_phase(&scenario, &pilots, power, noiseless)?;
    let meta = PilotsMeta {
        seed: config.seed,
        bandwidth: config.bandwidth,
        noise_psd: scenario.noise_psd(),
        power,
        noiseless,
    };
    write_and_print(&pilots_to_file(&dataset, &meta)?, out)
}

pub fn estimate(pilots_path: &Path, out: &Path) -> Result<()> {
    let (dataset, meta) = pilots_from_file(&read_and_print(pilots_path)?)?;
    print_dims(&dataset.dims);
    println!("seed: {}", meta.seed);

    let users = dataset.received.users();
    let estimates = (0..users)
        .into_par_iter()
        .map(|user| estimate_channel(&dataset, user))
        .collect::<irslink_core::Result<Vec<_>>>()?;
    let estimate_meta = EstimateMeta {
        seed: meta.seed,
        bandwidth: meta.bandwidth,
        power: meta.power,
    };
    write_and_print(&estimates_to_file(&estimates, &estimate_meta)?, out)
}

/// Objective settings for one user's optimization run. The noise level
/// defaults to the user's own pilot-residual estimate; an explicit
/// `--noise-psd` overrides it (the pipeline passes the scenario's value so
/// predictions are comparable with true rates).
fn settings_for(
    power: f64,
    bandwidth: f64,
    noise_psd_override: Option<f64>,
    noise_estimate: f64,
    received_power_scale: f64,
    overrides: &SearchOverrides,
) -> Result<OptimizationSettings> {
    let noise_psd = match noise_psd_override {
        Some(value) => value,
        None => {
            // A residual many orders below the signal is projection
            // round-off, not a measured noise level.
            let floor = received_power_scale * 1e-18;
            if noise_estimate.is_nan() || noise_estimate <= floor {
                bail!(
                    "the pilot noise estimate is zero (noiseless dataset); \
                     pass --noise-psd to set the objective's noise level"
                );
            }
            noise_estimate / bandwidth
        }
    };
    let mut settings = OptimizationSettings::new(power, bandwidth, noise_psd)?;
    if let Some(value) = overrides.max_flip_passes {
        settings.max_flip_passes = value;
    }
    if let Some(value) = overrides.improvement_tolerance {
        settings.improvement_tolerance = value;
    }
    if let Some(value) = overrides.phase_grid_size {
        settings.phase_grid_size = value;
    }
    settings.validate()?;
    Ok(settings)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SearchOverrides {
    pub max_flip_passes: Option<usize>,
    pub improvement_tolerance: Option<f64>,
    pub phase_grid_size: Option<usize>,
}

pub fn optimize(
    estimates_path: &Path,
    power: Option<f64>,
    noise_psd: Option<f64>,
    overrides: &SearchOverrides,
    out: &Path,
) -> Result<()> {
    let (estimates, meta) = estimates_from_file(&read_and_print(estimates_path)?)?;
    let dims = estimates[0].dims;
    print_dims(&dims);
    println!("seed: {}", meta.seed);
    let power = power.unwrap_or(meta.power);

    let results = estimates
        .par_iter()
        .map(|estimate| {
            let bins = estimate.element_freq.data().len().max(1);
            let received_scale = estimate.pilot_power
                * estimate.element_freq.data().iter().map(|v| v.norm_sqr()).sum::<f64>()
                / bins as f64;
            let settings = settings_for(
                power,
                meta.bandwidth,
                noise_psd,
                estimate.noise_variance_estimate,
                received_scale,
                overrides,
            )?;
            Ok(optimize_wideband(estimate, &settings)?)
        })
        .collect::<Result<Vec<ConfigurationResult>>>()?;

    for (user, result) in results.iter().enumerate() {
        println!(
            "user {user}: predicted {:.6e} bits/s ({}, {} flips)",
            result.predicted_rate, result.method, result.flips_performed
        );
    }

    let matrix = submission_matrix(&results)?;
    let result_meta: Vec<ResultMeta> = results
        .iter()
        .enumerate()
        .map(|(user, result)| ResultMeta {
            user,
            predicted_rate: result.predicted_rate,
            method: result.method.clone(),
            flips_performed: result.flips_performed,
        })
        .collect();
    write_and_print(&submission_to_file(dims, &matrix, &result_meta, meta.seed)?, out)
}

pub fn evaluate(
    scenario_path: &Path,
    results_path: &Path,
    estimates_path: Option<&Path>,
    oracle: bool,
    power: f64,
    json: bool,
    out: &Path,
) -> Result<()> {
    let scenario = scenario_from_file(&read_and_print(scenario_path)?)?;
    let submission_file = read_and_print(results_path)?;
    let (matrix, result_meta) = submission_from_file(&submission_file)?;
    let config = scenario.config().clone();
    print_dims(&config.dims);
    println!("seed: {}", config.seed);

    if result_meta.is_empty() {
        bail!(
            "submission file carries no per-user results metadata; \
             evaluate the optimizer's output file, not a bare export"
        );
    }
    let configs = configurations_from_matrix(&matrix)?;
    if configs.len() != scenario.users().len() {
        bail!(
            "submission has {} configurations, scenario has {} users",
            configs.len(),
            scenario.users().len()
        );
    }
    let results: Vec<ConfigurationResult> = configs
        .into_iter()
        .enumerate()
        .map(|(user, theta)| {
            let meta = result_meta
                .iter()
                .find(|m| m.user == user)
                .with_context(|| format!("no results metadata for user {user}"))?;
            Ok(ConfigurationResult {
                theta,
                predicted_rate: meta.predicted_rate,
                method: meta.method.clone(),
                flips_performed: meta.flips_performed,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut baselines = standard_baselines(&scenario);
    if oracle {
        let estimates_path = estimates_path
            .context("--oracle needs --estimates <file> to search the estimated channels")?;
        let (estimates, est_meta) = estimates_from_file(&read_and_print(estimates_path)?)?;
        let oracle_configs = estimates
            .par_iter()
            .map(|estimate| {
                let settings =
                    OptimizationSettings::new(power, est_meta.bandwidth, scenario.noise_psd())?;
                Ok(exhaustive_oracle(estimate, &settings)?.theta)
            })
            .collect::<Result<Vec<IrsConfiguration>>>()?;
        baselines.insert("oracle".into(), oracle_configs);
    }

    let report = compare_report(&scenario, &results, &baselines, power, config.bandwidth)?;
    print_report(&report, json)?;
    write_and_print(&report_to_file(config.dims, &report, config.seed)?, out)
}

fn print_report(report: &RateReport, json: bool) -> Result<()> {
    if json {
        println!("{}", serde_json::to_string_pretty(report)?);
    } else {
        print!("{}", report.table());
    }
    Ok(())
}

pub fn export(results_path: &Path, out: &Path) -> Result<()> {
    let file = read_and_print(results_path)?;
    let (matrix, meta) = submission_from_file(&file)?;
    print_dims(&file.dims);
    let seed = file.meta_u64("seed").unwrap_or(0);
    println!("seed: {seed}");

    // Strict full-size submission contract.
    let results: Vec<ConfigurationResult> = configurations_from_matrix(&matrix)?
        .into_iter()
        .enumerate()
        .map(|(user, theta)| ConfigurationResult {
            theta,
            predicted_rate: meta
                .iter()
                .find(|m| m.user == user)
                .map(|m| m.predicted_rate)
                .unwrap_or(0.0),
            method: "export".into(),
            flips_performed: 0,
        })
        .collect();
    let matrix = export_submission(&results)?;
    write_and_print(&submission_to_file(file.dims, &matrix, &[], seed)?, out)
}

pub fn validate(path: &Path, users: usize) -> Result<()> {
    let file = read_and_print(path)?;
    print_dims(&file.dims);
    println!("seed: {}", file.meta_u64("seed").unwrap_or(0));
    let violations = validate_submission(&file, users);
    if violations.is_empty() {
        println!("ok: submission satisfies the contract ({}×{users}, entries ±1)", file.dims.elements());
        Ok(())
    } else {
        for violation in &violations {
            println!("violation {violation}");
        }
        bail!("{} violation(s) found", violations.len());
    }
}

#[allow(clippy::too_many_arguments)]
pub fn pipeline(
    config: &ScenarioConfig,
    repetitions: usize,
    noiseless: bool,
    power: f64,
    oracle: bool,
    overrides: &SearchOverrides,
    json: bool,
    out_dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let scenario_path = out_dir.join("scenario.irsd");
    let pilots_path = out_dir.join("pilots.irsd");
    let estimates_path = out_dir.join("estimates.irsd");
    let submission_path = out_dir.join("submission.irsd");
    let report_path = out_dir.join("report.irsd");

    println!("== generate ==");
    generate(config, &scenario_path)?;
    println!("== simulate ==");
    simulate(&scenario_path, repetitions, noiseless, power, &pilots_path)?;
    println!("== estimate ==");
    estimate(&pilots_path, &estimates_path)?;

    // The scenario's noise level is a scoring constant shared with the
    // evaluator, so predictions and true rates are directly comparable.
    let scenario = scenario_from_file(&DatasetFile::read_from(&scenario_path)?)?;
    println!("== optimize ==");
    optimize(
        &estimates_path,
        Some(power),
        Some(scenario.noise_psd()),
        overrides,
        &submission_path,
    )?;
    println!("== evaluate ==");
    evaluate(
        &scenario_path,
        &submission_path,
        oracle.then_some(estimates_path.as_path()),
        oracle,
        power,
        json,
        &report_path,
    )?;

    if config.dims.elements() == irslink_core::optimizer::SUBMISSION_ELEMENTS
        && config.num_users == irslink_core::optimizer::SUBMISSION_USERS
    {
        println!("== export ==");
        export(&submission_path, &out_dir.join("theta.irsd"))?;
    }
    Ok(())
}

